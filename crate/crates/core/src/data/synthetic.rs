//! Synthetic SEER-like cohorts with configurable year-over-year drift.
//!
//! Cohorts are generated year by year from a single ChaCha8 stream. For
//! year index `y` (0-based from `base_year`):
//!
//! * `age ~ N(age_mean + age_mean_trend * y, age_std)` truncated to the schema range,
//! * `tumour_size ~ N(tumour_size_mean + tumour_size_trend * y, tumour_size_std)` truncated,
//! * grade, stage and ER status are categorical draws whose probabilities move
//!   linearly by the category trends (clamped at zero, then renormalised),
//! * 5-year survival is Bernoulli with a logistic model of the features
//!   whose intercept moves by `survival_logit_trend * y`.
//!
//! Zero drift coefficients give every year the same distribution.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use super::record::{FeatureValue, Outcome, PatientRecord, VitalStatus};
use super::schema::FeatureSchema;
use super::DataError;
use crate::{math, rng};

const GRADES: [&str; 4] = ["1", "2", "3", "4"];
const STAGES: [&str; 4] = ["I", "II", "III", "IV"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurvivalModel {
    pub intercept: f64,
    pub reference_age: f64,
    pub age_per_year: f64,
    pub reference_tumour_size: f64,
    pub tumour_size_per_mm: f64,
    /// Logit effect per grade `1..=4`.
    pub grade_effects: Vec<f64>,
    /// Logit effect per stage `I..=IV`.
    pub stage_effects: Vec<f64>,
    pub er_negative_effect: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaseDistributions {
    pub age_mean: f64,
    pub age_std: f64,
    pub tumour_size_mean: f64,
    pub tumour_size_std: f64,
    pub grade_probabilities: Vec<f64>,
    pub stage_probabilities: Vec<f64>,
    pub er_positive_probability: f64,
    pub survival: SurvivalModel,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CategoryTrends {
    pub grade: Vec<f64>,
    pub stage: Vec<f64>,
    pub er_positive: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DriftCoefficients {
    /// mm per year.
    pub tumour_size_trend: f64,
    /// Logit units per year added to the survival intercept.
    pub survival_logit_trend: f64,
    /// Years of mean age per calendar year.
    pub age_mean_trend: f64,
    pub category_probability_trends: CategoryTrends,
}

impl DriftCoefficients {
    pub fn is_zero(&self) -> bool {
        let t = &self.category_probability_trends;
        self.tumour_size_trend == 0.0
            && self.survival_logit_trend == 0.0
            && self.age_mean_trend == 0.0
            && t.er_positive == 0.0
            && t.grade.iter().all(|&v| v == 0.0)
            && t.stage.iter().all(|&v| v == 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticConfig {
    pub base_year: i32,
    pub years: u32,
    pub patients_per_year: u32,
    pub base: BaseDistributions,
    #[serde(default)]
    pub drift: DriftCoefficients,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    /// Mild, realistic drift: smaller tumours, older patients, slowly
    /// improving survival.
    fn default() -> Self {
        Self {
            base_year: 1982,
            years: 21,
            patients_per_year: 300,
            base: BaseDistributions::default(),
            drift: DriftCoefficients {
                tumour_size_trend: -0.3,
                survival_logit_trend: 0.03,
                age_mean_trend: 0.1,
                category_probability_trends: CategoryTrends {
                    grade: Vec::new(),
                    stage: vec![0.004, 0.0, -0.002, -0.002],
                    er_positive: 0.0,
                },
            },
            seed: 20_220_101,
        }
    }
}

impl Default for BaseDistributions {
    fn default() -> Self {
        Self {
            age_mean: 58.0,
            age_std: 12.0,
            tumour_size_mean: 30.0,
            tumour_size_std: 10.0,
            grade_probabilities: vec![0.2, 0.4, 0.3, 0.1],
            stage_probabilities: vec![0.45, 0.3, 0.17, 0.08],
            er_positive_probability: 0.75,
            survival: SurvivalModel {
                intercept: 2.0,
                reference_age: 58.0,
                age_per_year: -0.03,
                reference_tumour_size: 30.0,
                tumour_size_per_mm: -0.04,
                grade_effects: vec![0.0, -0.3, -0.6, -0.9],
                stage_effects: vec![0.0, -0.6, -1.3, -2.2],
                er_negative_effect: -0.4,
            },
        }
    }
}

impl SyntheticConfig {
    pub fn null_drift() -> Self {
        Self {
            drift: DriftCoefficients::default(),
            ..Self::default()
        }
    }

    /// Survival improves steadily over 24 years, so a model fitted on the
    /// early years underestimates later survival.
    pub fn improvement_drift() -> Self {
        Self {
            base_year: 1982,
            years: 24,
            patients_per_year: 500,
            base: BaseDistributions::default(),
            drift: DriftCoefficients {
                tumour_size_trend: -0.3,
                survival_logit_trend: 0.06,
                age_mean_trend: 0.0,
                category_probability_trends: CategoryTrends::default(),
            },
            seed: 1982,
        }
    }

    /// Case mix moves strongly towards larger tumours, older patients and
    /// later stages, taking the last years well outside the first years'
    /// feature distribution.
    pub fn shifted_cohort() -> Self {
        Self {
            base_year: 1990,
            years: 12,
            patients_per_year: 500,
            base: BaseDistributions::default(),
            drift: DriftCoefficients {
                tumour_size_trend: 2.5,
                survival_logit_trend: 0.0,
                age_mean_trend: 1.0,
                category_probability_trends: CategoryTrends {
                    grade: Vec::new(),
                    stage: vec![-0.03, 0.0, 0.015, 0.015],
                    er_positive: -0.02,
                },
            },
            seed: 1990,
        }
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let bad = |m: String| Err(DataError::InvalidConfig(m));
        if self.years == 0 {
            return bad("years must be positive".into());
        }
        if self.patients_per_year == 0 {
            return bad("patients_per_year must be positive".into());
        }
        let b = &self.base;
        if !(b.age_std > 0.0) || !(b.tumour_size_std > 0.0) {
            return bad("standard deviations must be positive".into());
        }
        for (name, probs, n) in [
            ("grade_probabilities", &b.grade_probabilities, 4),
            ("stage_probabilities", &b.stage_probabilities, 4),
        ] {
            if probs.len() != n || probs.iter().any(|p| !(*p >= 0.0)) {
                return bad(format!("{name} needs {n} non-negative entries"));
            }
        }
        if !(0.0..=1.0).contains(&b.er_positive_probability) {
            return bad("er_positive_probability must lie in [0, 1]".into());
        }
        let s = &b.survival;
        if s.grade_effects.len() != 4 || s.stage_effects.len() != 4 {
            return bad("survival grade/stage effects need 4 entries".into());
        }
        let t = &self.drift.category_probability_trends;
        if !(t.grade.is_empty() || t.grade.len() == 4) || !(t.stage.is_empty() || t.stage.len() == 4) {
            return bad("category trends need 0 or 4 entries".into());
        }
        for y in 0..self.years {
            let yf = y as f64;
            if drifted_probabilities(&b.grade_probabilities, &t.grade, yf).is_none()
                || drifted_probabilities(&b.stage_probabilities, &t.stage, yf).is_none()
            {
                return bad(format!("category probabilities vanish in year {}", self.base_year + y as i32));
            }
        }
        Ok(())
    }
}

fn drifted_probabilities(base: &[f64], trend: &[f64], y: f64) -> Option<Vec<f64>> {
    let raw: Vec<f64> = base
        .iter()
        .enumerate()
        .map(|(i, p)| (p + trend.get(i).copied().unwrap_or(0.0) * y).max(0.0))
        .collect();
    let total: f64 = raw.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    Some(raw.into_iter().map(|p| p / total).collect())
}

fn categorical_draw(probs: &[f64], rng: &mut rng::Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

fn truncated_normal(mean: f64, sd: f64, lo: f64, hi: f64, rng: &mut rng::Rng) -> f64 {
    let normal = Normal::new(mean, sd).expect("positive sd checked by validate");
    for _ in 0..10_000 {
        let v = normal.sample(rng);
        if (lo..=hi).contains(&v) {
            return v;
        }
    }
    mean.clamp(lo, hi)
}

fn round1(v: f64) -> f64 {
    libm::round(v * 10.0) / 10.0
}

pub fn generate_synthetic_cohort(config: &SyntheticConfig) -> Result<Dataset, DataError> {
    config.validate()?;
    let schema = FeatureSchema::default_seer();
    let range = |name: &str| schema.feature(name).and_then(|f| f.range()).expect("seer schema");
    let [age_lo, age_hi] = range("age");
    let [size_lo, size_hi] = range("tumour_size");
    let b = &config.base;
    let d = &config.drift;
    let s = &b.survival;
    let mut rng = rng::seeded(config.seed);
    let mut records = Vec::with_capacity((config.years * config.patients_per_year) as usize);

    for y in 0..config.years {
        let yf = y as f64;
        let year = config.base_year + y as i32;
        let grade_p = drifted_probabilities(&b.grade_probabilities, &d.category_probability_trends.grade, yf)
            .expect("validated");
        let stage_p = drifted_probabilities(&b.stage_probabilities, &d.category_probability_trends.stage, yf)
            .expect("validated");
        let er_pos_p = (b.er_positive_probability + d.category_probability_trends.er_positive * yf).clamp(0.0, 1.0);
        let age_mean = b.age_mean + d.age_mean_trend * yf;
        let size_mean = b.tumour_size_mean + d.tumour_size_trend * yf;
        let intercept = s.intercept + d.survival_logit_trend * yf;

        for i in 0..config.patients_per_year {
            let age = round1(truncated_normal(age_mean, b.age_std, age_lo, age_hi, &mut rng));
            let size = round1(truncated_normal(size_mean, b.tumour_size_std, size_lo, size_hi, &mut rng))
                .max(size_lo);
            let grade = categorical_draw(&grade_p, &mut rng);
            let stage = categorical_draw(&stage_p, &mut rng);
            let er_positive = rng.random::<f64>() < er_pos_p;

            let logit = intercept
                + s.age_per_year * (age - s.reference_age)
                + s.tumour_size_per_mm * (size - s.reference_tumour_size)
                + s.grade_effects[grade]
                + s.stage_effects[stage]
                + if er_positive { 0.0 } else { s.er_negative_effect };
            let survived = rng.random::<f64>() < math::sigmoid(logit);
            let (survival_months, event) = if survived {
                (60 + rng.random_range(0..=120u32), VitalStatus::AliveOrCensored)
            } else {
                (rng.random_range(1..=59u32), VitalStatus::DiedOfDisease)
            };
            let chemo = rng.random::<f64>() < 0.15 + 0.25 * stage as f64;
            let radio = rng.random::<f64>() < 0.5;
            let decision = match (stage, chemo, radio) {
                (3, _, _) if chemo => "chemotherapy",
                (_, true, _) => "surgery+chemotherapy",
                (_, false, true) => "surgery+radiotherapy",
                _ => "surgery",
            };

            let mut features = BTreeMap::new();
            features.insert("age".into(), FeatureValue::Number(age));
            features.insert("tumour_size".into(), FeatureValue::Number(size));
            features.insert("grade".into(), FeatureValue::Category(GRADES[grade].into()));
            features.insert("stage".into(), FeatureValue::Category(STAGES[stage].into()));
            features.insert(
                "er_status".into(),
                FeatureValue::Category(if er_positive { "pos" } else { "neg" }.into()),
            );
            records.push(PatientRecord {
                patient_id: format!("P{year}-{i:05}"),
                diagnosis_year: year,
                features,
                outcome: Some(Outcome {
                    survival_months,
                    event,
                    decision: decision.into(),
                    recorded_at_step: 0,
                }),
            });
        }
    }
    let label = format!("{}-{}", config.base_year, config.base_year + config.years as i32 - 1);
    Dataset::new(schema, records, label)
}
