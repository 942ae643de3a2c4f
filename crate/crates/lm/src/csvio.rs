//! Patient records as CSV.
//!
//! Columns are `patient_id`, `diagnosis_year`, one column per schema
//! feature in schema order, then `survival_months`, `event` and `decision`.
//! An empty feature cell means the feature is absent. Empty outcome cells
//! mean the outcome is not known yet.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use lm_core::data::{DataError, FeatureKind, FeatureSchema, FeatureValue, Outcome, PatientRecord, VitalStatus};
use lm_core::Dataset;

const OUTCOME_COLUMNS: [&str; 3] = ["survival_months", "event", "decision"];

#[derive(Debug, thiserror::Error)]
pub enum CsvError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("header: missing column `{0}`")]
    MissingColumn(String),
    #[error("header: unknown column `{0}`")]
    UnknownColumn(String),
    #[error("header: outcome columns must be all present or all absent")]
    PartialOutcomeColumns,
    #[error("row {row}: {reason}")]
    Row { row: usize, reason: String },
    #[error("row {row}: {source}")]
    Invalid { row: usize, source: DataError },
}

struct Layout {
    id: usize,
    year: usize,
    features: Vec<(usize, String, bool)>,
    outcome: Option<[usize; 3]>,
}

fn layout(headers: &csv::StringRecord, schema: &FeatureSchema) -> Result<Layout, CsvError> {
    let position = |name: &str| headers.iter().position(|h| h.trim() == name);
    let need = |name: &str| position(name).ok_or_else(|| CsvError::MissingColumn(name.into()));
    for h in headers {
        let h = h.trim();
        let known = h == "patient_id" || h == "diagnosis_year" || OUTCOME_COLUMNS.contains(&h) || schema.feature(h).is_some();
        if !known {
            return Err(CsvError::UnknownColumn(h.into()));
        }
    }
    let mut features = Vec::new();
    for spec in schema.features() {
        match position(&spec.name) {
            Some(i) => features.push((i, spec.name.clone(), spec.is_continuous())),
            None if spec.required => return Err(CsvError::MissingColumn(spec.name.clone())),
            None => {}
        }
    }
    let outcome_cols: Vec<Option<usize>> = OUTCOME_COLUMNS.iter().map(|c| position(c)).collect();
    let outcome = match outcome_cols.as_slice() {
        [Some(a), Some(b), Some(c)] => Some([*a, *b, *c]),
        [None, None, None] => None,
        _ => return Err(CsvError::PartialOutcomeColumns),
    };
    Ok(Layout {
        id: need("patient_id")?,
        year: need("diagnosis_year")?,
        features,
        outcome,
    })
}

fn parse_row(row: &csv::StringRecord, layout: &Layout) -> Result<PatientRecord, String> {
    let cell = |i: usize| row.get(i).map(str::trim).unwrap_or("");
    let patient_id = cell(layout.id);
    if patient_id.is_empty() {
        return Err("empty patient_id".into());
    }
    let diagnosis_year = cell(layout.year)
        .parse::<i32>()
        .map_err(|_| format!("diagnosis_year `{}` is not an integer", cell(layout.year)))?;
    let mut features = BTreeMap::new();
    for (i, name, continuous) in &layout.features {
        let v = cell(*i);
        if v.is_empty() {
            continue;
        }
        let value = if *continuous {
            FeatureValue::Number(v.parse().map_err(|_| format!("`{name}` = `{v}` is not a number"))?)
        } else {
            FeatureValue::Category(v.into())
        };
        features.insert(name.clone(), value);
    }
    let outcome = match layout.outcome {
        None => None,
        Some([m, e, d]) => match (cell(m), cell(e), cell(d)) {
            ("", "", "") => None,
            (m, e, d) if !m.is_empty() && !e.is_empty() => Some(Outcome {
                survival_months: m
                    .parse()
                    .map_err(|_| format!("survival_months `{m}` is not a non-negative integer"))?,
                event: VitalStatus::parse(e)
                    .ok_or_else(|| format!("event `{e}` is not died_of_disease or alive_or_censored"))?,
                decision: d.into(),
                recorded_at_step: 0,
            }),
            _ => return Err("outcome cells must be all empty or survival_months and event both set".into()),
        },
    };
    Ok(PatientRecord {
        patient_id: patient_id.into(),
        diagnosis_year,
        features,
        outcome,
    })
}

/// Parses every row, keeping per-row failures. Header problems are fatal.
/// Rows are numbered from 1, not counting the header.
pub fn parse_rows(input: impl Read, schema: &FeatureSchema) -> Result<Vec<Result<PatientRecord, CsvError>>, CsvError> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(input);
    let headers = reader.headers()?.clone();
    let layout = layout(&headers, schema)?;
    let mut out = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row_no = i + 1;
        out.push(match row {
            Ok(r) => parse_row(&r, &layout).map_err(|reason| CsvError::Row { row: row_no, reason }),
            Err(e) => Err(CsvError::Row {
                row: row_no,
                reason: e.to_string(),
            }),
        });
    }
    Ok(out)
}

/// Reads and validates a whole file; the first bad row is an error.
pub fn read_dataset(input: impl Read, schema: &FeatureSchema, label: &str) -> Result<Dataset, CsvError> {
    let mut records = Vec::new();
    for (i, row) in parse_rows(input, schema)?.into_iter().enumerate() {
        let record = row?;
        records.push(schema.validate(&record).map_err(|source| CsvError::Invalid { row: i + 1, source })?);
    }
    Ok(Dataset::new(schema.clone(), records, label).expect("rows validated above"))
}

pub fn load_dataset(path: &Path, schema: &FeatureSchema) -> Result<Dataset, CsvError> {
    let file = File::open(path).map_err(|source| CsvError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let label = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    read_dataset(file, schema, &label)
}

fn header(schema: &FeatureSchema) -> Vec<String> {
    let mut h = vec!["patient_id".to_string(), "diagnosis_year".to_string()];
    h.extend(schema.names().map(String::from));
    h.extend(OUTCOME_COLUMNS.iter().map(|c| c.to_string()));
    h
}

pub fn write_dataset(out: impl Write, dataset: &Dataset) -> Result<(), CsvError> {
    let mut w = csv::Writer::from_writer(out);
    let schema = dataset.schema();
    w.write_record(header(schema))?;
    for r in dataset.records() {
        let mut row = vec![r.patient_id.clone(), r.diagnosis_year.to_string()];
        for spec in schema.features() {
            row.push(match (r.features.get(&spec.name), &spec.kind) {
                (None, _) => String::new(),
                (Some(FeatureValue::Number(v)), FeatureKind::Continuous { .. }) => v.to_string(),
                (Some(FeatureValue::Number(v)), _) => v.to_string(),
                (Some(FeatureValue::Category(c)), _) => c.clone(),
            });
        }
        match &r.outcome {
            Some(o) => {
                row.push(o.survival_months.to_string());
                row.push(o.event.as_str().into());
                row.push(o.decision.clone());
            }
            None => row.extend([String::new(), String::new(), String::new()]),
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(|source| CsvError::Io {
        path: "<output>".into(),
        source,
    })?;
    Ok(())
}

pub fn save_dataset(path: &Path, dataset: &Dataset) -> Result<(), CsvError> {
    let io = |source| CsvError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = File::create(path).map_err(io)?;
    let mut buf = std::io::BufWriter::new(file);
    write_dataset(&mut buf, dataset)?;
    buf.flush().map_err(io)
}
