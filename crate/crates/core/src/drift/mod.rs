//! Two-sample drift statistics between a logged reference dataset and a
//! later window, and the corrected multi-feature report built from them.

mod categorical;
mod detection;
mod ks;
mod report;

pub use categorical::{category_table, chi_square_categorical};
pub use detection::{logistic_detection, DETECTION_FOLDS, DETECTION_L2};
pub use ks::{boundary_adherence, ks_two_sample, output_drift};
pub use report::{
    benjamini_hochberg, drift_report, DriftReport, FeatureDrift, ReportLabels, ScoreSamples, Verdict,
    VerdictPolicy, VerdictReason,
};

use alloc::string::String;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DriftError {
    #[error("{0} sample is empty")]
    EmptySample(&'static str),
    #[error("frequency tables share no category")]
    NoSharedCategories,
    #[error("score {value} is outside [0, 1]")]
    ScoreOutOfRange { value: f64 },
    #[error("{class} has {rows} rows, fewer than the {folds} cross-validation folds")]
    TooFewRows { class: &'static str, rows: usize, folds: usize },
    #[error("reference and window schemas differ")]
    SchemaMismatch,
    #[error("significance level {0} is outside [0, 1)")]
    InvalidAlpha(f64),
    #[error("invalid verdict policy: {0}")]
    InvalidPolicy(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMethod {
    KolmogorovSmirnov,
    ChiSquare,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n_ref: usize,
    pub n_new: usize,
    pub method: TestMethod,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionResult {
    pub auc: f64,
    /// `max(0, 2 * auc - 1)`.
    pub score: f64,
    pub n_folds: usize,
    pub seed: u64,
}

impl DetectionResult {
    pub fn from_auc(auc: f64, n_folds: usize, seed: u64) -> Self {
        Self {
            auc,
            score: (2.0 * auc - 1.0).max(0.0),
            n_folds,
            seed,
        }
    }
}
