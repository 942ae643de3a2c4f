use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::record::{evaluable_label, PatientRecord};
use super::schema::FeatureSchema;
use super::DataError;

/// Inclusive calendar-year range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct YearRange {
    pub start: i32,
    pub end: i32,
}

impl YearRange {
    pub fn new(start: i32, end: i32) -> Result<Self, DataError> {
        if start > end {
            return Err(DataError::InvalidRange { start, end });
        }
        Ok(Self { start, end })
    }

    pub fn contains(&self, year: i32) -> bool {
        self.start <= year && year <= self.end
    }

    pub fn overlaps(&self, other: &YearRange) -> bool {
        self.start <= other.end && other.start <= self.end
    }

    pub fn label(&self) -> String {
        format!("{}-{}", self.start, self.end)
    }
}

impl core::fmt::Display for YearRange {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{}-{}", self.start, self.end)
    }
}

impl core::str::FromStr for YearRange {
    type Err = DataError;

    /// Accepts `1982-1992` or a single year `1985`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || DataError::InvalidConfig(format!("cannot parse year range `{s}`"));
        let (a, b) = match s.split_once('-') {
            Some((a, b)) => (a.trim(), b.trim()),
            None => (s.trim(), s.trim()),
        };
        let start = a.parse().map_err(|_| bad())?;
        let end = b.parse().map_err(|_| bad())?;
        Self::new(start, end)
    }
}

/// Records that all validate against `schema`. Fields are private so the
/// invariant cannot be broken after construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDataset")]
pub struct Dataset {
    schema: FeatureSchema,
    records: Vec<PatientRecord>,
    window_label: String,
}

#[derive(Deserialize)]
struct RawDataset {
    schema: FeatureSchema,
    records: Vec<PatientRecord>,
    window_label: String,
}

impl TryFrom<RawDataset> for Dataset {
    type Error = DataError;

    fn try_from(raw: RawDataset) -> Result<Self, Self::Error> {
        Dataset::new(raw.schema, raw.records, raw.window_label)
    }
}

impl Dataset {
    pub fn new(
        schema: FeatureSchema,
        records: Vec<PatientRecord>,
        window_label: impl Into<String>,
    ) -> Result<Self, DataError> {
        let records = records
            .iter()
            .map(|r| schema.validate(r))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            schema,
            records,
            window_label: window_label.into(),
        })
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn records(&self) -> &[PatientRecord] {
        &self.records
    }

    pub fn window_label(&self) -> &str {
        &self.window_label
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn year_span(&self) -> Option<YearRange> {
        let min = self.records.iter().map(|r| r.diagnosis_year).min()?;
        let max = self.records.iter().map(|r| r.diagnosis_year).max()?;
        Some(YearRange { start: min, end: max })
    }

    /// Same schema, chosen records (already validated, so no re-check).
    pub fn subset(&self, indices: &[usize], label: impl Into<String>) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            records: indices.iter().map(|&i| self.records[i].clone()).collect(),
            window_label: label.into(),
        }
    }

    /// Only the records that carry a usable 5-year label.
    pub fn labeled(&self) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            records: self
                .records
                .iter()
                .filter(|r| evaluable_label(r).is_some())
                .cloned()
                .collect(),
            window_label: self.window_label.clone(),
        }
    }

    /// Appends already-validated records from a dataset with the same schema.
    pub fn extend_from(&mut self, other: &Dataset) -> Result<(), DataError> {
        if other.schema != self.schema {
            return Err(DataError::InvalidSchema("schemas differ".into()));
        }
        self.records.extend(other.records.iter().cloned());
        Ok(())
    }

    pub fn push(&mut self, record: &PatientRecord) -> Result<(), DataError> {
        let r = self.schema.validate(record)?;
        self.records.push(r);
        Ok(())
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Dataset {
        self.window_label = label.into();
        self
    }

    /// Sorted by diagnosis year; ties keep their input order.
    pub fn chronological(&self) -> Dataset {
        let mut records = self.records.clone();
        records.sort_by_key(|r| r.diagnosis_year);
        Dataset {
            schema: self.schema.clone(),
            records,
            window_label: self.window_label.clone(),
        }
    }
}

/// Records diagnosed within `range`, labelled `start-end`.
pub fn window(dataset: &Dataset, range: YearRange) -> Result<Dataset, DataError> {
    YearRange::new(range.start, range.end)?;
    let records: Vec<PatientRecord> = dataset
        .records
        .iter()
        .filter(|r| range.contains(r.diagnosis_year))
        .cloned()
        .collect();
    if records.is_empty() {
        return Err(DataError::EmptyWindow {
            start: range.start,
            end: range.end,
        });
    }
    Ok(Dataset {
        schema: dataset.schema.clone(),
        records,
        window_label: range.label(),
    })
}
