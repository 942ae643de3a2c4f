//! Train on one span of diagnosis years, test on later spans.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::machine::history_split;
use crate::data::{descriptive_stats, window, DataError, Dataset, YearRange};
use crate::model::{
    evaluate, permutation_importance, predict, train_model, Family, Metrics, ModelError, Prediction,
};
use crate::rng;
use crate::space::Hyperparams;
use crate::tuner::{select_model, SelectionReport, TunerError};

/// Permutation repeats used for experiment importances.
pub const IMPORTANCE_REPEATS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRequest {
    pub train: YearRange,
    pub tests: Vec<YearRange>,
    #[serde(default = "all_families")]
    pub families: Vec<Family>,
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default)]
    pub seed: u64,
    /// Patients whose per-model predictions are kept in the report.
    #[serde(default)]
    pub patient_ids: Vec<String>,
}

fn all_families() -> Vec<Family> {
    Family::ALL.to_vec()
}

fn default_budget() -> usize {
    8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDescriptor {
    pub version_id: String,
    pub family: Family,
    pub hyperparams: Hyperparams,
    /// Validation AUC on the internal chronological split.
    pub validation_auc: f64,
    pub metrics_at_train: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentCell {
    pub model_version: String,
    pub test_window: String,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientComparison {
    pub patient_id: String,
    pub diagnosis_year: i32,
    pub observed_label: Option<bool>,
    /// Keyed by model version id.
    pub predictions: BTreeMap<String, Prediction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub id: String,
    pub train_window: String,
    pub test_windows: Vec<String>,
    pub request: ExperimentRequest,
    pub models: Vec<ModelDescriptor>,
    pub selection: SelectionReport,
    pub cells: Vec<ExperimentCell>,
    /// Model version id to feature importances on the train window.
    pub importances: BTreeMap<String, BTreeMap<String, f64>>,
    pub patients: Vec<PatientComparison>,
}

impl ExperimentReport {
    pub fn cell(&self, model_version: &str, test_window: &str) -> Option<&Metrics> {
        self.cells
            .iter()
            .find(|c| c.model_version == model_version && c.test_window == test_window)
            .map(|c| &c.metrics)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExperimentError {
    #[error("no test windows requested")]
    NoTestWindows,
    #[error("window {0} has no labelled records")]
    EmptyWindow(YearRange),
    #[error("test window {test} overlaps train window {train}")]
    Overlap { train: YearRange, test: YearRange },
    #[error("unknown patient id {0}")]
    UnknownPatient(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Tuner(#[from] TunerError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn labeled_window(dataset: &Dataset, range: YearRange) -> Result<Dataset, ExperimentError> {
    let w = match window(dataset, range) {
        Ok(w) => w,
        Err(DataError::EmptyWindow { .. }) => return Err(ExperimentError::EmptyWindow(range)),
        Err(e) => return Err(e.into()),
    };
    let labeled = w.labeled();
    if labeled.is_empty() {
        return Err(ExperimentError::EmptyWindow(range));
    }
    Ok(labeled)
}

/// Selects the best hyperparameters per family on a chronological split of
/// the train window, refits each on the whole window, and scores every
/// test window. A test window equal to the train window is allowed and
/// gives resubstitution metrics; any other overlap is an error.
pub fn temporal_experiment(dataset: &Dataset, request: &ExperimentRequest) -> Result<ExperimentReport, ExperimentError> {
    if request.tests.is_empty() {
        return Err(ExperimentError::NoTestWindows);
    }
    for t in &request.tests {
        if *t != request.train && t.overlaps(&request.train) {
            return Err(ExperimentError::Overlap {
                train: request.train,
                test: *t,
            });
        }
    }
    let train = labeled_window(dataset, request.train)?;
    let tests = request
        .tests
        .iter()
        .map(|&t| labeled_window(dataset, t))
        .collect::<Result<Vec<_>, _>>()?;
    let mut patients_wanted = Vec::new();
    for id in &request.patient_ids {
        let record = dataset
            .records()
            .iter()
            .find(|r| &r.patient_id == id)
            .ok_or_else(|| ExperimentError::UnknownPatient(id.clone()))?;
        patients_wanted.push(record);
    }

    let (fit, validation) = history_split(&train);
    let selection = select_model(&fit, &validation, &request.families, request.budget, rng::derive(request.seed, 0))?;

    let stats = descriptive_stats(&train)?;
    let mut models = Vec::new();
    let mut cells = Vec::new();
    let mut importances = BTreeMap::new();
    let mut trained = Vec::new();
    for outcome in &selection.report.families {
        let Some(result) = &outcome.result else { continue };
        let family = outcome.family;
        let model = train_model(
            family,
            &train,
            &result.best_hyperparams,
            rng::derive(request.seed, 1 + family as u64),
        )?;
        for (range, test) in request.tests.iter().zip(&tests) {
            cells.push(ExperimentCell {
                model_version: model.version_id.clone(),
                test_window: range.label(),
                metrics: evaluate(&model, test)?,
            });
        }
        importances.insert(
            model.version_id.clone(),
            permutation_importance(
                &model,
                &train,
                rng::derive(request.seed, 100 + family as u64),
                IMPORTANCE_REPEATS,
            )?,
        );
        models.push(ModelDescriptor {
            version_id: model.version_id.clone(),
            family,
            hyperparams: result.best_hyperparams.clone(),
            validation_auc: result.best_score,
            metrics_at_train: model.metrics_at_train.clone(),
        });
        trained.push(model);
    }

    let mut patients = Vec::new();
    for record in patients_wanted {
        let mut predictions = BTreeMap::new();
        for m in &trained {
            predictions.insert(m.version_id.clone(), predict(m, record, &stats, 0)?);
        }
        patients.push(PatientComparison {
            patient_id: record.patient_id.clone(),
            diagnosis_year: record.diagnosis_year,
            observed_label: crate::data::evaluable_label(record),
            predictions,
        });
    }

    Ok(ExperimentReport {
        id: String::new(),
        train_window: request.train.label(),
        test_windows: request.tests.iter().map(YearRange::label).collect(),
        request: request.clone(),
        models,
        selection: selection.report,
        cells,
        importances,
        patients,
    })
}
