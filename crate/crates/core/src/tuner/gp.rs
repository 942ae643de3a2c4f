//! Gaussian-process surrogate on the unit cube with a squared-exponential
//! kernel and one shared lengthscale.

use alloc::vec;
use alloc::vec::Vec;

use crate::math;

pub const LENGTHSCALES: [f64; 5] = [0.05, 0.1, 0.2, 0.4, 0.8];
pub const SIGNAL_VARIANCES: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];
/// Diagonal jitter tried in order until the covariance factorises.
pub const JITTERS: [f64; 5] = [1e-6, 1e-5, 1e-4, 1e-3, 1e-2];

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianProcess {
    pub lengthscale: f64,
    pub signal_variance: f64,
    pub jitter: f64,
    pub log_marginal_likelihood: f64,
    inputs: Vec<Vec<f64>>,
    chol: Vec<f64>,
    alpha: Vec<f64>,
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl GaussianProcess {
    pub fn kernel(&self, a: &[f64], b: &[f64]) -> f64 {
        se_kernel(a, b, self.lengthscale, self.signal_variance)
    }

    /// Fits at fixed kernel parameters, escalating the jitter from
    /// `jitter` through the larger entries of [`JITTERS`]. `None` if no
    /// jitter makes the covariance positive definite.
    pub fn fit(inputs: &[Vec<f64>], targets: &[f64], lengthscale: f64, signal_variance: f64, jitter: f64) -> Option<Self> {
        let n = inputs.len();
        if n == 0 || n != targets.len() {
            return None;
        }
        let mut base = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                base[i * n + j] = se_kernel(&inputs[i], &inputs[j], lengthscale, signal_variance);
            }
        }
        for &eps in JITTERS.iter().filter(|&&e| e >= jitter) {
            let mut k = base.clone();
            for i in 0..n {
                k[i * n + i] += eps;
            }
            let Some(chol) = math::cholesky(&k, n) else { continue };
            let alpha = math::backward_substitute(&chol, n, &math::forward_substitute(&chol, n, targets));
            let fit_term: f64 = targets.iter().zip(&alpha).map(|(y, a)| y * a).sum();
            let log_det: f64 = (0..n).map(|i| libm::log(chol[i * n + i])).sum();
            let lml = -0.5 * fit_term - log_det - 0.5 * n as f64 * libm::log(2.0 * core::f64::consts::PI);
            if !lml.is_finite() {
                continue;
            }
            return Some(Self {
                lengthscale,
                signal_variance,
                jitter: eps,
                log_marginal_likelihood: lml,
                inputs: inputs.to_vec(),
                chol,
                alpha,
            });
        }
        None
    }

    /// Kernel parameters from the fixed grid by maximum marginal
    /// likelihood. Ties keep the earlier grid point.
    pub fn fit_best(inputs: &[Vec<f64>], targets: &[f64]) -> Option<Self> {
        let mut best: Option<Self> = None;
        for &l in &LENGTHSCALES {
            for &s in &SIGNAL_VARIANCES {
                if let Some(gp) = Self::fit(inputs, targets, l, s, JITTERS[0]) {
                    if best
                        .as_ref()
                        .map_or(true, |b| gp.log_marginal_likelihood > b.log_marginal_likelihood)
                    {
                        best = Some(gp);
                    }
                }
            }
        }
        best
    }

    /// Posterior mean and variance (noise-free) at `x`.
    pub fn predict(&self, x: &[f64]) -> (f64, f64) {
        let n = self.inputs.len();
        let k: Vec<f64> = self.inputs.iter().map(|xi| self.kernel(xi, x)).collect();
        let mean = k.iter().zip(&self.alpha).map(|(a, b)| a * b).sum();
        let v = math::forward_substitute(&self.chol, n, &k);
        let var = self.signal_variance - v.iter().map(|x| x * x).sum::<f64>();
        (mean, var.max(0.0))
    }
}

pub fn se_kernel(a: &[f64], b: &[f64], lengthscale: f64, signal_variance: f64) -> f64 {
    signal_variance * libm::exp(-squared_distance(a, b) / (2.0 * lengthscale * lengthscale))
}

/// Expected improvement over `incumbent` for maximisation. Zero variance
/// gives the deterministic improvement `max(mean - incumbent, 0)`.
pub fn expected_improvement(mean: f64, variance: f64, incumbent: f64) -> f64 {
    let sd = libm::sqrt(variance.max(0.0));
    let gain = mean - incumbent;
    if sd < 1e-12 {
        return gain.max(0.0);
    }
    let z = gain / sd;
    (gain * math::normal_cdf(z) + sd * math::normal_pdf(z)).max(0.0)
}

/// Radical-inverse (Halton) sequence point `index` (1-based) in the first
/// `dims` prime bases.
pub fn halton(index: u64, dims: usize) -> Vec<f64> {
    const PRIMES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    (0..dims)
        .map(|d| {
            let base = PRIMES[d % PRIMES.len()];
            let mut f = 1.0;
            let mut r = 0.0;
            let mut i = index;
            while i > 0 {
                f /= base as f64;
                r += f * (i % base) as f64;
                i /= base;
            }
            r
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng as _;

    #[test]
    fn interpolates_training_points() {
        let mut r = rng::seeded(1);
        let x: Vec<Vec<f64>> = (0..8).map(|_| vec![r.random::<f64>(), r.random::<f64>()]).collect();
        let y: Vec<f64> = x.iter().map(|p| libm::sin(6.0 * p[0]) + p[1]).collect();
        let m = math::mean(&y);
        let s = math::std_population(&y);
        let z: Vec<f64> = y.iter().map(|v| (v - m) / s).collect();
        for &l in &LENGTHSCALES[..3] {
            let gp = GaussianProcess::fit(&x, &z, l, 1.0, 1e-6).unwrap();
            assert_eq!(gp.jitter, 1e-6);
            for (xi, zi) in x.iter().zip(&z) {
                assert!((gp.predict(xi).0 - zi).abs() < 1e-3);
            }
        }
    }

    #[test]
    fn duplicate_inputs_escalate_jitter() {
        let x = vec![vec![0.5], vec![0.5], vec![0.5]];
        let gp = GaussianProcess::fit(&x, &[1.0, 1.0, 1.0], 0.8, 4.0, 1e-6);
        // duplicates are singular without jitter; some level must succeed
        assert!(gp.is_some());
    }

    #[test]
    fn ei_limits() {
        assert_eq!(expected_improvement(1.0, 0.0, 1.0), 0.0);
        assert_eq!(expected_improvement(0.5, 0.0, 1.0), 0.0);
        assert!(expected_improvement(0.5, 1e-30, 1.0) == 0.0);
        assert!(expected_improvement(0.0, 1.0, 0.0) > 0.39);
        let mut r = rng::seeded(2);
        for _ in 0..1000 {
            let ei = expected_improvement(r.random_range(-3.0..3.0), r.random_range(0.0..4.0), r.random_range(-3.0..3.0));
            assert!(ei >= 0.0);
        }
    }

    #[test]
    fn halton_first_points() {
        assert_eq!(halton(1, 2), vec![0.5, 1.0 / 3.0]);
        assert_eq!(halton(2, 2), vec![0.25, 2.0 / 3.0]);
    }
}
