use alloc::collections::BTreeMap;
use alloc::string::String;

use serde::{Deserialize, Serialize};

use super::DataError;

/// Survival months at or beyond which a patient counts as a 5-year survivor.
pub const FIVE_YEARS_MONTHS: u32 = 60;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FeatureValue {
    Number(f64),
    Category(String),
}

impl FeatureValue {
    pub fn as_number(&self) -> Option<f64> {
        match self {
            FeatureValue::Number(v) => Some(*v),
            FeatureValue::Category(_) => None,
        }
    }

    pub fn as_category(&self) -> Option<&str> {
        match self {
            FeatureValue::Category(c) => Some(c),
            FeatureValue::Number(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VitalStatus {
    DiedOfDisease,
    AliveOrCensored,
}

impl VitalStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            VitalStatus::DiedOfDisease => "died_of_disease",
            VitalStatus::AliveOrCensored => "alive_or_censored",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "died_of_disease" => Some(VitalStatus::DiedOfDisease),
            "alive_or_censored" => Some(VitalStatus::AliveOrCensored),
            _ => None,
        }
    }
}

/// Realized outcome `r_t` together with the practitioner decision `y_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub survival_months: u32,
    pub event: VitalStatus,
    pub decision: String,
    #[serde(default)]
    pub recorded_at_step: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientRecord {
    pub patient_id: String,
    pub diagnosis_year: i32,
    pub features: BTreeMap<String, FeatureValue>,
    #[serde(default)]
    pub outcome: Option<Outcome>,
}

impl PatientRecord {
    pub fn number(&self, feature: &str) -> Option<f64> {
        self.features.get(feature).and_then(FeatureValue::as_number)
    }

    pub fn category(&self, feature: &str) -> Option<&str> {
        self.features.get(feature).and_then(FeatureValue::as_category)
    }
}

/// `survival_months >= 60`. Errors when the outcome is not yet known.
pub fn label_five_year_survival(record: &PatientRecord) -> Result<bool, DataError> {
    record
        .outcome
        .as_ref()
        .map(|o| o.survival_months >= FIVE_YEARS_MONTHS)
        .ok_or_else(|| DataError::MissingOutcome {
            patient_id: record.patient_id.clone(),
        })
}

/// Label used for training and evaluation. Records without an outcome and
/// records censored before 60 months carry no usable label.
pub fn evaluable_label(record: &PatientRecord) -> Option<bool> {
    let outcome = record.outcome.as_ref()?;
    if outcome.survival_months >= FIVE_YEARS_MONTHS {
        Some(true)
    } else if outcome.event == VitalStatus::DiedOfDisease {
        Some(false)
    } else {
        None
    }
}
