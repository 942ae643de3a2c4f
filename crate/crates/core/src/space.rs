//! Hyperparameter values and the spaces they are drawn from.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HyperValue {
    Real(f64),
    Choice(String),
}

pub type Hyperparams = BTreeMap<String, HyperValue>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Domain {
    Continuous { lo: f64, hi: f64, scale: Scale },
    Categorical { choices: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dimension {
    pub name: String,
    #[serde(flatten)]
    pub domain: Domain,
}

impl Dimension {
    pub fn continuous(name: &str, lo: f64, hi: f64, scale: Scale) -> Self {
        Self {
            name: name.into(),
            domain: Domain::Continuous { lo, hi, scale },
        }
    }

    /// Maps `u` in [0, 1] onto the dimension (log-uniformly on log scales).
    pub fn from_unit(&self, u: f64) -> Option<f64> {
        match self.domain {
            Domain::Continuous { lo, hi, scale } => {
                let u = u.clamp(0.0, 1.0);
                Some(match scale {
                    Scale::Linear => lo + u * (hi - lo),
                    Scale::Log => {
                        let (a, b) = (libm::log(lo), libm::log(hi));
                        libm::exp(a + u * (b - a)).clamp(lo, hi)
                    }
                })
            }
            Domain::Categorical { .. } => None,
        }
    }

    pub fn to_unit(&self, v: f64) -> Option<f64> {
        match self.domain {
            Domain::Continuous { lo, hi, scale } => Some(
                match scale {
                    Scale::Linear => (v - lo) / (hi - lo),
                    Scale::Log => (libm::log(v) - libm::log(lo)) / (libm::log(hi) - libm::log(lo)),
                }
                .clamp(0.0, 1.0),
            ),
            Domain::Categorical { .. } => None,
        }
    }

    pub fn contains(&self, value: &HyperValue) -> bool {
        match (&self.domain, value) {
            (Domain::Continuous { lo, hi, .. }, HyperValue::Real(v)) => *lo <= *v && *v <= *hi,
            (Domain::Categorical { choices }, HyperValue::Choice(c)) => choices.contains(c),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid search space: {0}")]
pub struct SpaceError(pub String);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpace")]
pub struct SearchSpace {
    dimensions: Vec<Dimension>,
}

#[derive(Deserialize)]
struct RawSpace {
    dimensions: Vec<Dimension>,
}

impl TryFrom<RawSpace> for SearchSpace {
    type Error = SpaceError;

    fn try_from(raw: RawSpace) -> Result<Self, Self::Error> {
        SearchSpace::new(raw.dimensions)
    }
}

impl SearchSpace {
    pub fn new(dimensions: Vec<Dimension>) -> Result<Self, SpaceError> {
        for (i, d) in dimensions.iter().enumerate() {
            if dimensions[..i].iter().any(|o| o.name == d.name) {
                return Err(SpaceError(format!("duplicate dimension `{}`", d.name)));
            }
            match &d.domain {
                Domain::Continuous { lo, hi, scale } => {
                    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                        return Err(SpaceError(format!("`{}` needs lo < hi", d.name)));
                    }
                    if *scale == Scale::Log && !(*lo > 0.0) {
                        return Err(SpaceError(format!("`{}` is log-scaled and needs lo > 0", d.name)));
                    }
                }
                Domain::Categorical { choices } => {
                    if choices.is_empty() {
                        return Err(SpaceError(format!("`{}` has no choices", d.name)));
                    }
                }
            }
        }
        Ok(Self { dimensions })
    }

    pub fn dimensions(&self) -> &[Dimension] {
        &self.dimensions
    }

    pub fn is_continuous(&self) -> bool {
        self.dimensions
            .iter()
            .all(|d| matches!(d.domain, Domain::Continuous { .. }))
    }

    pub fn contains(&self, params: &Hyperparams) -> bool {
        params.len() == self.dimensions.len()
            && self
                .dimensions
                .iter()
                .all(|d| params.get(&d.name).is_some_and(|v| d.contains(v)))
    }

    /// One independent draw: uniform, or log-uniform on log-scaled dimensions.
    pub fn sample(&self, r: &mut Rng) -> Hyperparams {
        self.dimensions
            .iter()
            .map(|d| {
                let v = match &d.domain {
                    Domain::Continuous { .. } => {
                        HyperValue::Real(d.from_unit(r.random::<f64>()).expect("continuous"))
                    }
                    Domain::Categorical { choices } => {
                        HyperValue::Choice(choices[r.random_range(0..choices.len())].clone())
                    }
                };
                (d.name.clone(), v)
            })
            .collect()
    }

    /// Point of the unit cube to hyperparameters; continuous spaces only.
    pub fn from_unit(&self, u: &[f64]) -> Hyperparams {
        self.dimensions
            .iter()
            .zip(u)
            .map(|(d, &ui)| (d.name.clone(), HyperValue::Real(d.from_unit(ui).expect("continuous space"))))
            .collect()
    }

    pub fn to_unit(&self, params: &Hyperparams) -> Vec<f64> {
        self.dimensions
            .iter()
            .map(|d| match params.get(&d.name) {
                Some(HyperValue::Real(v)) => d.to_unit(*v).unwrap_or(0.5),
                _ => 0.5,
            })
            .collect()
    }
}
