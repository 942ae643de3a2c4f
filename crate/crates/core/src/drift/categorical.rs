use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use super::{DriftError, TestMethod, TestResult};
use crate::data::PatientRecord;
use crate::math;

/// Counts per category for `feature`, with every category in `universe`
/// present (possibly zero).
pub fn category_table<'a>(
    universe: &[String],
    feature: &str,
    records: impl Iterator<Item = &'a PatientRecord>,
) -> BTreeMap<String, usize> {
    let mut table: BTreeMap<String, usize> = universe.iter().map(|c| (c.clone(), 0)).collect();
    for r in records {
        if let Some(c) = r.category(feature) {
            *table.entry(c.into()).or_insert(0) += 1;
        }
    }
    table
}

/// Pearson chi-square test of homogeneity on the 2 x k table formed by the
/// two frequency tables. Categories absent from both are dropped; with one
/// or no category left the tables cannot differ and the result is
/// statistic 0, p-value 1.
pub fn chi_square_categorical(
    reference: &BTreeMap<String, usize>,
    new: &BTreeMap<String, usize>,
) -> Result<TestResult, DriftError> {
    let n_ref: usize = reference.values().sum();
    let n_new: usize = new.values().sum();
    if n_ref == 0 {
        return Err(DriftError::EmptySample("reference"));
    }
    if n_new == 0 {
        return Err(DriftError::EmptySample("new"));
    }
    if !reference.keys().any(|k| new.contains_key(k)) {
        return Err(DriftError::NoSharedCategories);
    }
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let mut keys: Vec<&String> = reference.keys().chain(new.keys()).collect();
    keys.sort();
    keys.dedup();
    for k in keys {
        let a = reference.get(k).copied().unwrap_or(0);
        let b = new.get(k).copied().unwrap_or(0);
        if a + b > 0 {
            cells.push((a as f64, b as f64));
        }
    }
    if cells.len() <= 1 {
        return Ok(TestResult {
            statistic: 0.0,
            p_value: 1.0,
            n_ref,
            n_new,
            method: TestMethod::ChiSquare,
        });
    }
    let total = (n_ref + n_new) as f64;
    let (ra, rb) = (n_ref as f64, n_new as f64);
    let mut statistic = 0.0;
    for &(a, b) in &cells {
        let col = a + b;
        let ea = ra * col / total;
        let eb = rb * col / total;
        statistic += (a - ea) * (a - ea) / ea + (b - eb) * (b - eb) / eb;
    }
    Ok(TestResult {
        statistic,
        p_value: math::chi_square_sf(statistic, (cells.len() - 1) as f64),
        n_ref,
        n_new,
        method: TestMethod::ChiSquare,
    })
}
