//! Patient-data schema, validated datasets, descriptive statistics and the
//! synthetic SEER-like cohort generator.

mod dataset;
mod record;
mod schema;
mod stats;
mod synthetic;

pub use dataset::{window, Dataset, YearRange};
pub use record::{
    evaluable_label, label_five_year_survival, FeatureValue, Outcome, PatientRecord, VitalStatus,
    FIVE_YEARS_MONTHS,
};
pub use schema::{FeatureKind, FeatureSchema, FeatureSpec};
pub use stats::{descriptive_stats, ContinuousSummary, Histogram, StatsSummary, HISTOGRAM_BINS};
pub use synthetic::{
    generate_synthetic_cohort, BaseDistributions, CategoryTrends, DriftCoefficients,
    SurvivalModel, SyntheticConfig,
};

use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DataError {
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("patient {patient_id}: missing required feature `{feature}`")]
    MissingFeature { patient_id: String, feature: String },
    #[error("patient {patient_id}: unknown feature `{feature}`")]
    UnknownFeature { patient_id: String, feature: String },
    #[error("patient {patient_id}: `{feature}` = {value} outside [{min}, {max}]")]
    OutOfRange {
        patient_id: String,
        feature: String,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("patient {patient_id}: `{feature}` = {value:?} is not one of the schema categories")]
    UnknownCategory {
        patient_id: String,
        feature: String,
        value: String,
    },
    #[error("patient {patient_id}: `{feature}` must be {expected}")]
    WrongType {
        patient_id: String,
        feature: String,
        expected: &'static str,
    },
    #[error("window {start}-{end} contains no records")]
    EmptyWindow { start: i32, end: i32 },
    #[error("invalid year range: start {start} > end {end}")]
    InvalidRange { start: i32, end: i32 },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("patient {patient_id} has no recorded outcome")]
    MissingOutcome { patient_id: String },
    #[error("invalid synthetic config: {0}")]
    InvalidConfig(String),
}
