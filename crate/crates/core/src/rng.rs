//! Seeded randomness.
//!
//! Every stochastic routine takes an explicit `u64` seed and draws from
//! ChaCha8 (`rand_chacha::ChaCha8Rng`), seeded through `seed_from_u64`.
//! Independent sub-streams are derived with a SplitMix64 finalizer so that
//! e.g. fold assignment and ensemble member `i` never share a stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Mixes `seed` and `stream` into a new, well-separated seed.
pub fn derive(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn substream(seed: u64, stream: u64) -> Rng {
    seeded(derive(seed, stream))
}

/// Fisher-Yates shuffle driven by the crate RNG.
pub fn shuffle<T>(items: &mut [T], rng: &mut Rng) {
    use rand::seq::SliceRandom;
    items.shuffle(rng);
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    #[test]
    fn derived_streams_differ() {
        let a: u64 = substream(7, 0).random();
        let b: u64 = substream(7, 1).random();
        assert_ne!(a, b);
        assert_eq!(a, substream(7, 0).random::<u64>());
    }
}
