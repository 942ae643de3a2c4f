//! L2-regularised logistic regression fitted by full-batch gradient descent.
//!
//! Objective, for `n` rows with labels `y` in {0, 1}:
//!
//! ```text
//! L(w, b) = (1/n) * sum_i [softplus(z_i) - y_i z_i] + (l2 / (2n)) * |w|^2,   z_i = w.x_i + b
//! ```
//!
//! The intercept is not penalised. Each coordinate's gradient is scaled by
//! the inverse of its curvature bound `0.25 mean(x_j^2) + l2 / n` (4 for the
//! intercept), so a strong penalty on the weights does not force a tiny
//! step onto the unpenalised intercept. Each iteration tries the current
//! step and halves it while the objective would increase; an accepted step
//! is doubled for the next iteration. Iteration stops once the infinity-norm
//! of the raw gradient drops below the tolerance.

use alloc::vec;
use alloc::vec::Vec;

use super::encode::Design;
use super::ModelError;
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescentOptions {
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub initial_step: f64,
}

impl Default for DescentOptions {
    fn default() -> Self {
        Self {
            max_iterations: 5000,
            gradient_tolerance: 1e-6,
            initial_step: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticFit {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub converged: bool,
    /// Objective after each accepted step, starting with the initial value.
    pub loss_trace: Vec<f64>,
}

pub fn objective(x: &Design, y: &[f64], weights: &[f64], intercept: f64, l2: f64) -> f64 {
    let n = x.rows as f64;
    let mut total = 0.0;
    for i in 0..x.rows {
        let z = dot(x.row(i), weights) + intercept;
        total += math::softplus(z) - y[i] * z;
    }
    let penalty: f64 = weights.iter().map(|w| w * w).sum();
    total / n + l2 * penalty / (2.0 * n)
}

/// Objective value with its gradient `(d/dw, d/db)`.
pub fn objective_and_gradient(
    x: &Design,
    y: &[f64],
    weights: &[f64],
    intercept: f64,
    l2: f64,
) -> (f64, Vec<f64>, f64) {
    let n = x.rows as f64;
    let mut total = 0.0;
    let mut grad = vec![0.0; x.cols];
    let mut grad_b = 0.0;
    for i in 0..x.rows {
        let row = x.row(i);
        let z = dot(row, weights) + intercept;
        total += math::softplus(z) - y[i] * z;
        let residual = math::sigmoid(z) - y[i];
        for (g, v) in grad.iter_mut().zip(row) {
            *g += residual * v;
        }
        grad_b += residual;
    }
    let mut penalty = 0.0;
    for (g, w) in grad.iter_mut().zip(weights) {
        *g = *g / n + l2 * w / n;
        penalty += w * w;
    }
    (total / n + l2 * penalty / (2.0 * n), grad, grad_b / n)
}

pub fn fit(x: &Design, y: &[f64], l2: f64, options: DescentOptions) -> Result<LogisticFit, ModelError> {
    let fit = descend(x, y, l2, options);
    if fit.converged {
        Ok(fit)
    } else {
        Err(ModelError::NotConverged {
            iterations: fit.iterations,
            gradient_norm: fit.gradient_norm,
        })
    }
}

/// Runs the descent and returns the last iterate whether or not the
/// tolerance was reached.
pub fn descend(x: &Design, y: &[f64], l2: f64, options: DescentOptions) -> LogisticFit {
    assert_eq!(x.rows, y.len());
    let mut weights = vec![0.0; x.cols];
    let mut intercept = 0.0;
    let mut step = options.initial_step;
    let (mut loss, mut grad, mut grad_b) = objective_and_gradient(x, y, &weights, intercept, l2);
    let mut trace = vec![loss];
    let mut candidate = vec![0.0; x.cols];
    let mut iteration = 0;
    let n = x.rows.max(1) as f64;
    let mut scale = vec![0.0; x.cols];
    for i in 0..x.rows {
        for (s, v) in scale.iter_mut().zip(x.row(i)) {
            *s += v * v;
        }
    }
    for s in scale.iter_mut() {
        *s = 1.0 / (0.25 * *s / n + l2 / n).max(1e-12);
    }
    let scale_b = 4.0;

    loop {
        let norm = grad.iter().fold(libm::fabs(grad_b), |m, g| m.max(libm::fabs(*g)));
        let converged = norm < options.gradient_tolerance;
        if converged || iteration == options.max_iterations {
            return LogisticFit {
                weights,
                intercept,
                iterations: iteration,
                gradient_norm: norm,
                converged,
                loss_trace: trace,
            };
        }
        let mut accepted = false;
        for _ in 0..80 {
            for (((c, w), g), s) in candidate.iter_mut().zip(&weights).zip(&grad).zip(&scale) {
                *c = w - step * s * g;
            }
            let cand_b = intercept - step * scale_b * grad_b;
            let cand_loss = objective(x, y, &candidate, cand_b, l2);
            if cand_loss <= loss {
                weights.copy_from_slice(&candidate);
                intercept = cand_b;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // no step size decreases the objective: a numerical minimum
            return LogisticFit {
                weights,
                intercept,
                iterations: iteration,
                gradient_norm: norm,
                converged: false,
                loss_trace: trace,
            };
        }
        let next = objective_and_gradient(x, y, &weights, intercept, l2);
        loss = next.0;
        grad = next.1;
        grad_b = next.2;
        trace.push(loss);
        step = (step * 2.0).min(1e6);
        iteration += 1;
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
