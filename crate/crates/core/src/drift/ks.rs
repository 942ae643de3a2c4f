use alloc::vec::Vec;

use super::{DriftError, TestMethod, TestResult};
use crate::math;

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Two-sample Kolmogorov-Smirnov test. The p-value uses the asymptotic
/// Kolmogorov distribution at `sqrt(n m / (n + m)) * D` and is only
/// approximate for samples below about 20.
pub fn ks_two_sample(reference: &[f64], new: &[f64]) -> Result<TestResult, DriftError> {
    if reference.is_empty() {
        return Err(DriftError::EmptySample("reference"));
    }
    if new.is_empty() {
        return Err(DriftError::EmptySample("new"));
    }
    let a = sorted(reference);
    let b = sorted(new);
    let (n, m) = (a.len(), b.len());
    let (nf, mf) = (n as f64, m as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < n || j < m {
        // next pooled value; step both ECDFs past every copy of it
        let v = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => unreachable!(),
        };
        while i < n && a[i] <= v {
            i += 1;
        }
        while j < m && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / nf - j as f64 / mf).abs());
    }
    let effective = libm::sqrt(nf * mf / (nf + mf));
    Ok(TestResult {
        statistic: d,
        p_value: math::kolmogorov_sf(effective * d),
        n_ref: n,
        n_new: m,
        method: TestMethod::KolmogorovSmirnov,
    })
}

/// Fraction of `new` inside `[min(reference), max(reference)]`; an empty
/// `new` sample adheres fully.
pub fn boundary_adherence(reference: &[f64], new: &[f64]) -> Result<f64, DriftError> {
    if reference.is_empty() {
        return Err(DriftError::EmptySample("reference"));
    }
    if new.is_empty() {
        return Ok(1.0);
    }
    let lo = reference.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = reference.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let inside = new.iter().filter(|&&v| lo <= v && v <= hi).count();
    Ok(inside as f64 / new.len() as f64)
}

/// KS test on predicted probabilities (or any other [0, 1] scores).
pub fn output_drift(reference: &[f64], new: &[f64]) -> Result<TestResult, DriftError> {
    if let Some(&value) = reference.iter().chain(new).find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(DriftError::ScoreOutOfRange { value });
    }
    ks_two_sample(reference, new)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;

    fn brute_force(reference: &[f64], new: &[f64]) -> f64 {
        let ecdf = |s: &[f64], x: f64| s.iter().filter(|&&v| v <= x).count();
        reference
            .iter()
            .chain(new)
            .map(|&x| (ecdf(reference, x) as f64 / reference.len() as f64 - ecdf(new, x) as f64 / new.len() as f64).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn identical_samples() {
        let r = ks_two_sample(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn disjoint_supports() {
        assert_eq!(ks_two_sample(&[0.0; 3], &[1.0; 3]).unwrap().statistic, 1.0);
    }

    #[test]
    fn shifted_by_one() {
        let r = ks_two_sample(&[1.0, 2.0, 3.0, 4.0], &[2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!(r.statistic, brute_force(&[1.0, 2.0, 3.0, 4.0], &[2.0, 3.0, 4.0, 5.0]));
        assert_eq!(r.statistic, 0.25);
    }

    #[test]
    fn empty_is_an_error() {
        assert_eq!(ks_two_sample(&[], &[1.0]), Err(DriftError::EmptySample("reference")));
        assert_eq!(ks_two_sample(&[1.0], &[]), Err(DriftError::EmptySample("new")));
    }

    #[test]
    fn matches_brute_force_with_ties() {
        let mut r = rng::seeded(5);
        for _ in 0..300 {
            let n = r.random_range(1..=50);
            let m = r.random_range(1..=50);
            let a: Vec<f64> = (0..n).map(|_| r.random_range(0..10) as f64).collect();
            let b: Vec<f64> = (0..m).map(|_| r.random_range(0..10) as f64).collect();
            assert_eq!(ks_two_sample(&a, &b).unwrap().statistic, brute_force(&a, &b));
        }
    }

    #[test]
    fn boundary_examples() {
        assert_eq!(boundary_adherence(&[0.0, 10.0], &[-1.0, 5.0, 11.0, 3.0]).unwrap(), 0.5);
        assert_eq!(boundary_adherence(&[0.0, 10.0], &[]).unwrap(), 1.0);
        assert_eq!(boundary_adherence(&[0.0, 10.0], &[0.0, 10.0, 4.0]).unwrap(), 1.0);
        assert!(boundary_adherence(&[], &[1.0]).is_err());
    }

    #[test]
    fn separated_scores_drift() {
        let mut r = rng::seeded(8);
        let a: Vec<f64> = (0..200).map(|_| r.random_range(0.0..0.5)).collect();
        let b: Vec<f64> = (0..200).map(|_| r.random_range(0.5..1.0)).collect();
        assert!(output_drift(&a, &b).unwrap().p_value < 0.001);
        assert_eq!(output_drift(&a, &a).unwrap().statistic, 0.0);
        assert!(output_drift(&a, &[1.5]).is_err());
    }

    proptest! {
        #[test]
        fn symmetric(a in prop::collection::vec(-5.0f64..5.0, 1..40), b in prop::collection::vec(-5.0f64..5.0, 1..40)) {
            let x = ks_two_sample(&a, &b).unwrap();
            let y = ks_two_sample(&b, &a).unwrap();
            prop_assert_eq!(x.statistic, y.statistic);
            prop_assert_eq!(x.p_value, y.p_value);
        }

        #[test]
        fn invariant_under_increasing_maps(a in prop::collection::vec(-3.0f64..3.0, 1..40), b in prop::collection::vec(-3.0f64..3.0, 1..40)) {
            let f = |v: &f64| libm::exp(*v) * 2.0 + 1.0;
            let ta: Vec<f64> = a.iter().map(f).collect();
            let tb: Vec<f64> = b.iter().map(f).collect();
            prop_assert_eq!(ks_two_sample(&a, &b).unwrap().statistic, ks_two_sample(&ta, &tb).unwrap().statistic);
        }

        #[test]
        fn adherence_in_unit_interval(a in prop::collection::vec(-3.0f64..3.0, 1..20), b in prop::collection::vec(-6.0f64..6.0, 0..20)) {
            let s = boundary_adherence(&a, &b).unwrap();
            prop_assert!((0.0..=1.0).contains(&s));
        }
    }
}
