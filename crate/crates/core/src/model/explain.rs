//! Feature importance over a dataset and per-prediction attribution.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use super::{ModelError, Scorer};
use crate::data::{evaluable_label, Dataset, FeatureValue, PatientRecord, StatsSummary};
use crate::{math, rng};

/// `importance(f)` is the baseline AUC minus the mean AUC over `repeats`
/// independent within-column shuffles of feature `f`. Only records with a
/// usable label take part.
pub fn permutation_importance<S: Scorer + ?Sized>(
    model: &S,
    dataset: &Dataset,
    seed: u64,
    repeats: usize,
) -> Result<BTreeMap<String, f64>, ModelError> {
    if repeats == 0 {
        return Err(ModelError::NoRepeats);
    }
    if dataset.schema() != model.schema() {
        return Err(ModelError::DatasetSchemaMismatch);
    }
    let (records, labels): (Vec<&PatientRecord>, Vec<bool>) = dataset
        .records()
        .iter()
        .filter_map(|r| evaluable_label(r).map(|l| (r, l)))
        .unzip();
    if records.is_empty() {
        return Err(ModelError::NoLabeledRecords);
    }
    let scores: Vec<f64> = records.iter().map(|r| model.probability(r)).collect();
    let baseline = math::auc(&scores, &labels).ok_or(ModelError::SingleClass)?;

    let mut out = BTreeMap::new();
    let mut work: Vec<PatientRecord> = records.iter().map(|r| (*r).clone()).collect();
    for (fi, spec) in model.schema().features().iter().enumerate() {
        let column: Vec<Option<FeatureValue>> = records.iter().map(|r| r.features.get(&spec.name).cloned()).collect();
        let mut total = 0.0;
        for rep in 0..repeats {
            let mut r = rng::substream(seed, (fi * repeats + rep) as u64);
            let mut order: Vec<usize> = (0..records.len()).collect();
            rng::shuffle(&mut order, &mut r);
            for (row, &src) in work.iter_mut().zip(&order) {
                match &column[src] {
                    Some(v) => row.features.insert(spec.name.clone(), v.clone()),
                    None => row.features.remove(&spec.name),
                };
            }
            let permuted: Vec<f64> = work.iter().map(|r| model.probability(r)).collect();
            total += math::auc(&permuted, &labels).ok_or(ModelError::SingleClass)?;
        }
        // restore the column before moving on
        for (row, v) in work.iter_mut().zip(&column) {
            match v {
                Some(v) => row.features.insert(spec.name.clone(), v.clone()),
                None => row.features.remove(&spec.name),
            };
        }
        out.insert(spec.name.clone(), baseline - total / repeats as f64);
    }
    Ok(out)
}

/// Occlusion attribution for one validated record.
pub(super) fn occlusion<S: Scorer + ?Sized>(
    model: &S,
    record: &PatientRecord,
    reference: &StatsSummary,
) -> BTreeMap<String, f64> {
    let p = model.probability(record);
    let mut out = BTreeMap::new();
    let mut probe = record.clone();
    for spec in model.schema().features() {
        let replacement = if spec.is_continuous() {
            reference.mean(&spec.name).map(FeatureValue::Number)
        } else {
            reference.modal_category(&spec.name).map(|c| FeatureValue::Category(c.into()))
        };
        let value = match replacement {
            Some(v) => {
                let original = probe.features.insert(spec.name.clone(), v);
                let q = model.probability(&probe);
                match original {
                    Some(o) => probe.features.insert(spec.name.clone(), o),
                    None => probe.features.remove(&spec.name),
                };
                p - q
            }
            None => 0.0,
        };
        out.insert(spec.name.clone(), value);
    }
    out
}

/// `attribution(f) = p(record) - p(record with f set to the reference mean
/// or modal category)`, for every schema feature.
pub fn instance_attribution<S: Scorer + ?Sized>(
    model: &S,
    record: &PatientRecord,
    reference: &StatsSummary,
) -> Result<BTreeMap<String, f64>, ModelError> {
    let record = model.schema().validate(record).map_err(ModelError::SchemaMismatch)?;
    Ok(occlusion(model, &record, reference))
}
