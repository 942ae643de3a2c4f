use alloc::vec;
use alloc::vec::Vec;

use super::{DetectionResult, DriftError};
use crate::data::Dataset;
use crate::math;
use crate::model::encode::FeatureEncoder;
use crate::model::logistic::{self, DescentOptions};
use crate::rng;

pub const DETECTION_FOLDS: usize = 5;
pub const DETECTION_L2: f64 = 1.0;

/// Trains a classifier to tell reference rows (label 0) from new rows
/// (label 1) and reports its cross-validated AUC.
///
/// Continuous features are standardised with pooled statistics and
/// categoricals one-hot encoded. Folds are stratified: each class is
/// shuffled on its own and dealt round-robin into the folds. The score is
/// computed on the pooled out-of-fold predictions.
pub fn logistic_detection(reference: &Dataset, new: &Dataset, seed: u64) -> Result<DetectionResult, DriftError> {
    if reference.schema() != new.schema() {
        return Err(DriftError::SchemaMismatch);
    }
    for (class, d) in [("reference", reference), ("new", new)] {
        if d.len() < DETECTION_FOLDS {
            return Err(DriftError::TooFewRows {
                class,
                rows: d.len(),
                folds: DETECTION_FOLDS,
            });
        }
    }
    let pooled = || reference.records().iter().chain(new.records());
    let encoder = FeatureEncoder::fit(reference.schema(), pooled());
    let x = encoder.design(pooled());
    let n_ref = reference.len();
    let n = x.rows;
    let y: Vec<f64> = (0..n).map(|i| if i < n_ref { 0.0 } else { 1.0 }).collect();

    let mut r = rng::seeded(seed);
    let mut fold = vec![0usize; n];
    for range in [0..n_ref, n_ref..n] {
        let mut idx: Vec<usize> = range.collect();
        rng::shuffle(&mut idx, &mut r);
        for (pos, i) in idx.into_iter().enumerate() {
            fold[i] = pos % DETECTION_FOLDS;
        }
    }

    let options = DescentOptions::default();
    let mut scores = vec![0.0; n];
    for k in 0..DETECTION_FOLDS {
        let train: Vec<usize> = (0..n).filter(|&i| fold[i] != k).collect();
        let test: Vec<usize> = (0..n).filter(|&i| fold[i] == k).collect();
        let xt = x.select_rows(&train);
        let yt: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        // a capped iterate still ranks rows, which is all the AUC needs
        let fit = logistic::descend(&xt, &yt, DETECTION_L2, options);
        for &i in &test {
            scores[i] = logistic::dot(x.row(i), &fit.weights) + fit.intercept;
        }
    }
    let labels: Vec<bool> = (0..n).map(|i| i >= n_ref).collect();
    let auc = math::auc(&scores, &labels).expect("both classes present");
    Ok(DetectionResult::from_auc(auc, DETECTION_FOLDS, seed))
}
