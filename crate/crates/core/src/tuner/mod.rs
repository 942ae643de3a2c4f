//! Hyperparameter search: random search, Gaussian-process Bayesian
//! optimisation with expected improvement, and per-family model selection.

pub mod gp;
mod select;

pub use select::{select_model, FamilyOutcome, Selection, SelectionReport, ValidationProtocol};

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::rng;
use crate::space::{Hyperparams, SearchSpace};
use gp::GaussianProcess;

/// Candidate points scored by expected improvement per iteration.
pub const EI_CANDIDATES: usize = 1024;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TunerError {
    #[error("budget {budget} is below the minimum of {minimum}")]
    BudgetTooSmall { budget: usize, minimum: usize },
    #[error("Bayesian optimisation needs an all-continuous search space")]
    NotContinuous,
    #[error("all {0} trials failed")]
    AllTrialsFailed(usize),
    #[error("no model family could be tuned: {0}")]
    NoFamilySucceeded(String),
    #[error("no model families requested")]
    NoFamilies,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialSource {
    Random,
    LatinHypercube,
    ExpectedImprovement,
    /// The surrogate could not be fitted; a uniform draw was used instead.
    SurrogateFallback,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMethod {
    RandomSearch,
    BayesOpt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub index: usize,
    pub hyperparams: Hyperparams,
    /// `None` when the objective failed.
    pub score: Option<f64>,
    pub failure: Option<String>,
    pub source: TrialSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TunerResult {
    pub method: SearchMethod,
    pub best_hyperparams: Hyperparams,
    pub best_score: f64,
    pub trials: Vec<Trial>,
    pub budget_used: usize,
    pub seed: u64,
}

impl TunerResult {
    /// Best score seen after each trial; failed trials repeat the previous
    /// value (`None` until the first success).
    pub fn best_so_far(&self) -> Vec<Option<f64>> {
        let mut best: Option<f64> = None;
        self.trials
            .iter()
            .map(|t| {
                if let Some(s) = t.score {
                    best = Some(best.map_or(s, |b: f64| b.max(s)));
                }
                best
            })
            .collect()
    }
}

struct Recorder<F> {
    objective: F,
    trials: Vec<Trial>,
}

impl<F, E> Recorder<F>
where
    F: FnMut(&Hyperparams) -> Result<f64, E>,
    E: ToString,
{
    fn run(&mut self, hyperparams: Hyperparams, source: TrialSource) {
        let index = self.trials.len();
        let (score, failure) = match (self.objective)(&hyperparams) {
            Ok(s) if s.is_finite() => (Some(s), None),
            Ok(s) => (None, Some(format!("non-finite score {s}"))),
            Err(e) => (None, Some(e.to_string())),
        };
        self.trials.push(Trial {
            index,
            hyperparams,
            score,
            failure,
            source,
        });
    }

    fn finish(self, method: SearchMethod, seed: u64) -> Result<TunerResult, TunerError> {
        let mut best: Option<&Trial> = None;
        for t in &self.trials {
            if let Some(s) = t.score {
                if best.map_or(true, |b| s > b.score.expect("scored")) {
                    best = Some(t);
                }
            }
        }
        let best = best.ok_or(TunerError::AllTrialsFailed(self.trials.len()))?;
        Ok(TunerResult {
            method,
            best_hyperparams: best.hyperparams.clone(),
            best_score: best.score.expect("scored"),
            budget_used: self.trials.len(),
            trials: self.trials,
            seed,
        })
    }
}

/// `budget` independent draws; ties on score keep the earliest trial.
pub fn random_search<F, E>(space: &SearchSpace, objective: F, budget: usize, seed: u64) -> Result<TunerResult, TunerError>
where
    F: FnMut(&Hyperparams) -> Result<f64, E>,
    E: ToString,
{
    if budget == 0 {
        return Err(TunerError::BudgetTooSmall { budget, minimum: 1 });
    }
    let mut r = rng::seeded(seed);
    let mut rec = Recorder {
        objective,
        trials: Vec::new(),
    };
    for _ in 0..budget {
        let h = space.sample(&mut r);
        rec.run(h, TrialSource::Random);
    }
    rec.finish(SearchMethod::RandomSearch, seed)
}

pub fn initial_design_size(space: &SearchSpace) -> usize {
    (2 * space.dimensions().len()).max(4)
}

/// Latin hypercube on the unit cube: every dimension gets one point in each
/// of `n` equal strata.
pub fn latin_hypercube(n: usize, dims: usize, r: &mut rng::Rng) -> Vec<Vec<f64>> {
    let mut points = alloc::vec![alloc::vec![0.0; dims]; n];
    for d in 0..dims {
        let mut strata: Vec<usize> = (0..n).collect();
        rng::shuffle(&mut strata, r);
        for (p, s) in points.iter_mut().zip(strata) {
            p[d] = (s as f64 + r.random::<f64>()) / n as f64;
        }
    }
    points
}

/// Gaussian-process Bayesian optimisation (maximisation).
///
/// After a Latin-hypercube initial design of `max(4, 2d)` points, each
/// iteration standardises the successful scores, fits the surrogate with
/// grid-selected kernel parameters, and evaluates the candidate with the
/// largest expected improvement among 1024 Halton points under a fresh
/// random rotation. When the surrogate cannot be fitted the iteration
/// falls back to a uniform draw, marked in the trial log.
pub fn bayes_opt<F, E>(space: &SearchSpace, objective: F, budget: usize, seed: u64) -> Result<TunerResult, TunerError>
where
    F: FnMut(&Hyperparams) -> Result<f64, E>,
    E: ToString,
{
    if !space.is_continuous() {
        return Err(TunerError::NotContinuous);
    }
    let n_init = initial_design_size(space);
    if budget < n_init + 1 {
        return Err(TunerError::BudgetTooSmall {
            budget,
            minimum: n_init + 1,
        });
    }
    let dims = space.dimensions().len();
    let mut rec = Recorder {
        objective,
        trials: Vec::new(),
    };
    let mut init_rng = rng::substream(seed, 0);
    for u in latin_hypercube(n_init, dims, &mut init_rng) {
        rec.run(space.from_unit(&u), TrialSource::LatinHypercube);
    }
    while rec.trials.len() < budget {
        let iteration = rec.trials.len() as u64;
        let mut r = rng::substream(seed, iteration);
        match propose(space, &rec.trials, &mut r) {
            Some(u) => rec.run(space.from_unit(&u), TrialSource::ExpectedImprovement),
            None => {
                let h = space.sample(&mut r);
                rec.run(h, TrialSource::SurrogateFallback);
            }
        }
    }
    rec.finish(SearchMethod::BayesOpt, seed)
}

fn propose(space: &SearchSpace, trials: &[Trial], r: &mut rng::Rng) -> Option<Vec<f64>> {
    let (x, y): (Vec<Vec<f64>>, Vec<f64>) = trials
        .iter()
        .filter_map(|t| t.score.map(|s| (space.to_unit(&t.hyperparams), s)))
        .unzip();
    if x.len() < 2 {
        return None;
    }
    let mean = crate::math::mean(&y);
    let sd = crate::math::std_population(&y);
    let sd = if sd > 0.0 { sd } else { 1.0 };
    let z: Vec<f64> = y.iter().map(|v| (v - mean) / sd).collect();
    let incumbent = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let gp = GaussianProcess::fit_best(&x, &z)?;

    let dims = space.dimensions().len();
    let shift: Vec<f64> = (0..dims).map(|_| r.random::<f64>()).collect();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for i in 0..EI_CANDIDATES {
        let mut u = gp::halton(i as u64 + 1, dims);
        for (ui, s) in u.iter_mut().zip(&shift) {
            *ui = wrap_unit(*ui + s);
        }
        let (m, v) = gp.predict(&u);
        let ei = gp::expected_improvement(m, v, incumbent);
        if best.as_ref().map_or(true, |(b, _)| ei > *b) {
            best = Some((ei, u));
        }
    }
    best.map(|(_, u)| u)
}

/// Wraps into [0, 1).
fn wrap_unit(v: f64) -> f64 {
    v - libm::floor(v)
}
