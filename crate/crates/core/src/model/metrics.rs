use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{ModelError, Scorer};
use crate::data::{evaluable_label, Dataset};
use crate::math;

/// Log-loss clips probabilities to `[LOG_LOSS_CLIP, 1 - LOG_LOSS_CLIP]`.
pub const LOG_LOSS_CLIP: f64 = 1e-12;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub auc: f64,
    pub accuracy: f64,
    pub brier: f64,
    pub log_loss: f64,
    pub n: usize,
    pub observed_survival_rate: f64,
    pub mean_predicted_survival: f64,
}

impl Metrics {
    /// Observed minus mean predicted survival; positive when the model
    /// underestimates survival.
    pub fn calibration_gap(&self) -> f64 {
        self.observed_survival_rate - self.mean_predicted_survival
    }

    pub fn from_scores(probabilities: &[f64], labels: &[bool]) -> Result<Metrics, ModelError> {
        let n = probabilities.len();
        if n == 0 {
            return Err(ModelError::NoLabeledRecords);
        }
        let auc = math::auc(probabilities, labels).ok_or(ModelError::SingleClass)?;
        let mut correct = 0usize;
        let mut brier = 0.0;
        let mut log_loss = 0.0;
        let mut positives = 0usize;
        for (&p, &y) in probabilities.iter().zip(labels) {
            let t = if y { 1.0 } else { 0.0 };
            if (p >= 0.5) == y {
                correct += 1;
            }
            brier += (p - t) * (p - t);
            let q = p.clamp(LOG_LOSS_CLIP, 1.0 - LOG_LOSS_CLIP);
            log_loss -= t * libm::log(q) + (1.0 - t) * libm::log(1.0 - q);
            positives += y as usize;
        }
        let nf = n as f64;
        Ok(Metrics {
            auc,
            accuracy: correct as f64 / nf,
            brier: brier / nf,
            log_loss: log_loss / nf,
            n,
            observed_survival_rate: positives as f64 / nf,
            mean_predicted_survival: probabilities.iter().sum::<f64>() / nf,
        })
    }
}

/// Scores every evaluable record. Records censored before five years are
/// skipped (they carry no label); a record with no outcome at all is an
/// error.
pub fn evaluate<S: Scorer + ?Sized>(model: &S, dataset: &Dataset) -> Result<Metrics, ModelError> {
    if dataset.schema() != model.schema() {
        return Err(ModelError::DatasetSchemaMismatch);
    }
    let mut probabilities = Vec::with_capacity(dataset.len());
    let mut labels = Vec::with_capacity(dataset.len());
    for r in dataset.records() {
        if r.outcome.is_none() {
            return Err(ModelError::UnlabeledRecord {
                patient_id: r.patient_id.clone(),
            });
        }
        if let Some(label) = evaluable_label(r) {
            probabilities.push(model.probability(r));
            labels.push(label);
        }
    }
    Metrics::from_scores(&probabilities, &labels)
}
