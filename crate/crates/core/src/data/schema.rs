use alloc::borrow::ToOwned;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::record::{FeatureValue, PatientRecord};
use super::DataError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureKind {
    Continuous { range: [f64; 2] },
    Categorical { categories: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: FeatureKind,
    #[serde(default)]
    pub unit: String,
    #[serde(default = "yes")]
    pub required: bool,
}

fn yes() -> bool {
    true
}

impl FeatureSpec {
    pub fn continuous(name: &str, unit: &str, min: f64, max: f64) -> Self {
        Self {
            name: name.to_owned(),
            kind: FeatureKind::Continuous { range: [min, max] },
            unit: unit.to_owned(),
            required: true,
        }
    }

    pub fn categorical(name: &str, categories: &[&str]) -> Self {
        Self {
            name: name.to_owned(),
            kind: FeatureKind::Categorical {
                categories: categories.iter().map(|c| (*c).to_owned()).collect(),
            },
            unit: String::new(),
            required: true,
        }
    }

    pub fn is_continuous(&self) -> bool {
        matches!(self.kind, FeatureKind::Continuous { .. })
    }

    pub fn categories(&self) -> &[String] {
        match &self.kind {
            FeatureKind::Categorical { categories } => categories,
            FeatureKind::Continuous { .. } => &[],
        }
    }

    pub fn range(&self) -> Option<[f64; 2]> {
        match self.kind {
            FeatureKind::Continuous { range } => Some(range),
            FeatureKind::Categorical { .. } => None,
        }
    }
}

/// Ordered feature vocabulary. Construction enforces unique names,
/// `min < max` for continuous ranges and at least two categories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSchema")]
pub struct FeatureSchema {
    features: Vec<FeatureSpec>,
}

#[derive(Deserialize)]
struct RawSchema {
    features: Vec<FeatureSpec>,
}

impl TryFrom<RawSchema> for FeatureSchema {
    type Error = DataError;

    fn try_from(raw: RawSchema) -> Result<Self, Self::Error> {
        Self::new(raw.features)
    }
}

impl FeatureSchema {
    pub fn new(features: Vec<FeatureSpec>) -> Result<Self, DataError> {
        if features.is_empty() {
            return Err(DataError::InvalidSchema("no features".into()));
        }
        for (i, spec) in features.iter().enumerate() {
            if spec.name.is_empty() {
                return Err(DataError::InvalidSchema("empty feature name".into()));
            }
            if features[..i].iter().any(|other| other.name == spec.name) {
                return Err(DataError::InvalidSchema(format!(
                    "duplicate feature `{}`",
                    spec.name
                )));
            }
            match &spec.kind {
                FeatureKind::Continuous { range: [lo, hi] } => {
                    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                        return Err(DataError::InvalidSchema(format!(
                            "`{}` needs a finite range with min < max",
                            spec.name
                        )));
                    }
                }
                FeatureKind::Categorical { categories } => {
                    if categories.len() < 2 {
                        return Err(DataError::InvalidSchema(format!(
                            "`{}` needs at least two categories",
                            spec.name
                        )));
                    }
                    for (j, c) in categories.iter().enumerate() {
                        if categories[..j].contains(c) {
                            return Err(DataError::InvalidSchema(format!(
                                "`{}` repeats category `{c}`",
                                spec.name
                            )));
                        }
                    }
                }
            }
        }
        Ok(Self { features })
    }

    /// SEER-like breast-cancer vocabulary: age, tumour size, grade, stage
    /// and oestrogen-receptor status.
    pub fn default_seer() -> Self {
        Self::new(alloc::vec![
            FeatureSpec::continuous("age", "years", 18.0, 100.0),
            FeatureSpec::continuous("tumour_size", "mm", 0.1, 200.0),
            FeatureSpec::categorical("grade", &["1", "2", "3", "4"]),
            FeatureSpec::categorical("stage", &["I", "II", "III", "IV"]),
            FeatureSpec::categorical("er_status", &["pos", "neg"]),
        ])
        .expect("default schema is valid")
    }

    pub fn features(&self) -> &[FeatureSpec] {
        &self.features
    }

    pub fn feature(&self, name: &str) -> Option<&FeatureSpec> {
        self.features.iter().find(|f| f.name == name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.features.iter().map(|f| f.name.as_str())
    }

    /// Checks `record` and returns it in canonical form: categorical values
    /// given as integral numbers (`2` for grade `"2"`) become strings.
    pub fn validate(&self, record: &PatientRecord) -> Result<PatientRecord, DataError> {
        let pid = || record.patient_id.clone();
        for name in record.features.keys() {
            if self.feature(name).is_none() {
                return Err(DataError::UnknownFeature {
                    patient_id: pid(),
                    feature: name.clone(),
                });
            }
        }
        let mut features = BTreeMap::new();
        for spec in &self.features {
            let Some(value) = record.features.get(&spec.name) else {
                if spec.required {
                    return Err(DataError::MissingFeature {
                        patient_id: pid(),
                        feature: spec.name.clone(),
                    });
                }
                continue;
            };
            let canonical = match (&spec.kind, value) {
                (FeatureKind::Continuous { range: [lo, hi] }, FeatureValue::Number(v)) => {
                    if !v.is_finite() || *v < *lo || *v > *hi {
                        return Err(DataError::OutOfRange {
                            patient_id: pid(),
                            feature: spec.name.clone(),
                            value: *v,
                            min: *lo,
                            max: *hi,
                        });
                    }
                    FeatureValue::Number(*v)
                }
                (FeatureKind::Continuous { .. }, FeatureValue::Category(_)) => {
                    return Err(DataError::WrongType {
                        patient_id: pid(),
                        feature: spec.name.clone(),
                        expected: "a number",
                    })
                }
                (FeatureKind::Categorical { categories }, value) => {
                    let label = match value {
                        FeatureValue::Category(c) => c.clone(),
                        FeatureValue::Number(v) if libm::trunc(*v) == *v && v.is_finite() => {
                            format!("{}", *v as i64)
                        }
                        FeatureValue::Number(v) => v.to_string(),
                    };
                    if !categories.contains(&label) {
                        return Err(DataError::UnknownCategory {
                            patient_id: pid(),
                            feature: spec.name.clone(),
                            value: label,
                        });
                    }
                    FeatureValue::Category(label)
                }
            };
            features.insert(spec.name.clone(), canonical);
        }
        Ok(PatientRecord {
            patient_id: record.patient_id.clone(),
            diagnosis_year: record.diagnosis_year,
            features,
            outcome: record.outcome.clone(),
        })
    }
}
