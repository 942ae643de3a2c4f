//! Numeric design matrices: continuous features standardised with stored
//! statistics, categoricals one-hot against their first schema category.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::{FeatureKind, FeatureSchema, PatientRecord};
use crate::math;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum Column {
    Standardized { feature: String, mean: f64, std: f64 },
    Indicator { feature: String, category: String },
}

impl Column {
    pub fn feature(&self) -> &str {
        match self {
            Column::Standardized { feature, .. } | Column::Indicator { feature, .. } => feature,
        }
    }

    pub fn name(&self) -> String {
        match self {
            Column::Standardized { feature, .. } => feature.clone(),
            Column::Indicator { feature, category } => format!("{feature}={category}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureEncoder {
    pub columns: Vec<Column>,
}

impl FeatureEncoder {
    /// Standardisation statistics are taken from `records`. A constant or
    /// absent column keeps its mean and uses unit scale.
    pub fn fit<'a>(schema: &FeatureSchema, records: impl Iterator<Item = &'a PatientRecord> + Clone) -> Self {
        let mut columns = Vec::new();
        for spec in schema.features() {
            match &spec.kind {
                FeatureKind::Continuous { .. } => {
                    let values: Vec<f64> = records.clone().filter_map(|r| r.number(&spec.name)).collect();
                    let mean = if values.is_empty() { 0.0 } else { math::mean(&values) };
                    let std = math::std_population(&values);
                    let std = if std > 0.0 && std.is_finite() { std } else { 1.0 };
                    columns.push(Column::Standardized {
                        feature: spec.name.clone(),
                        mean,
                        std,
                    });
                }
                FeatureKind::Categorical { categories } => {
                    for c in categories.iter().skip(1) {
                        columns.push(Column::Indicator {
                            feature: spec.name.clone(),
                            category: c.clone(),
                        });
                    }
                }
            }
        }
        Self { columns }
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }

    /// Missing optional continuous values encode as the stored mean (0 after
    /// standardisation); missing categoricals as the reference level.
    pub fn encode_into(&self, record: &PatientRecord, out: &mut Vec<f64>) {
        for col in &self.columns {
            out.push(match col {
                Column::Standardized { feature, mean, std } => {
                    record.number(feature).map_or(0.0, |v| (v - mean) / std)
                }
                Column::Indicator { feature, category } => {
                    if record.category(feature) == Some(category.as_str()) {
                        1.0
                    } else {
                        0.0
                    }
                }
            });
        }
    }

    pub fn encode(&self, record: &PatientRecord) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.width());
        self.encode_into(record, &mut out);
        out
    }

    pub fn design<'a>(&self, records: impl Iterator<Item = &'a PatientRecord>) -> Design {
        let mut data = Vec::new();
        let mut rows = 0;
        for r in records {
            self.encode_into(r, &mut data);
            rows += 1;
        }
        Design {
            rows,
            cols: self.width(),
            data,
        }
    }
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Design {
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged design rows");
            data.extend_from_slice(r);
        }
        Self {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn select_rows(&self, indices: &[usize]) -> Design {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Design {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }
}
