use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use super::record::evaluable_label;
use super::schema::FeatureKind;
use super::DataError;
use crate::math;

/// Equal-width bins over the schema range so every window shares edges.
pub const HISTOGRAM_BINS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    fn over_range(lo: f64, hi: f64, values: &[f64]) -> Self {
        let width = (hi - lo) / HISTOGRAM_BINS as f64;
        let edges = (0..=HISTOGRAM_BINS).map(|i| lo + width * i as f64).collect();
        let mut counts = vec![0; HISTOGRAM_BINS];
        for &v in values {
            let bin = (((v - lo) / width) as usize).min(HISTOGRAM_BINS - 1);
            counts[bin] += 1;
        }
        Self { edges, counts }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuousSummary {
    pub count: usize,
    pub mean: f64,
    /// Population convention (divides by `count`).
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub histogram: Histogram,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsSummary {
    pub window_label: String,
    pub record_count: usize,
    pub continuous: BTreeMap<String, ContinuousSummary>,
    pub categorical: BTreeMap<String, BTreeMap<String, usize>>,
    /// Records with a usable 5-year label.
    pub labeled_count: usize,
    pub survived_5y_rate: Option<f64>,
    /// Schema order of categories per feature, used to break modal ties.
    pub category_order: BTreeMap<String, Vec<String>>,
}

impl StatsSummary {
    pub fn mean(&self, feature: &str) -> Option<f64> {
        self.continuous.get(feature).map(|s| s.mean)
    }

    /// Most frequent category; ties go to the earliest schema category.
    pub fn modal_category(&self, feature: &str) -> Option<&str> {
        let table = self.categorical.get(feature)?;
        let order = self.category_order.get(feature)?;
        let mut best: Option<(&str, usize)> = None;
        for c in order {
            let n = table.get(c).copied().unwrap_or(0);
            if best.map_or(true, |(_, m)| n > m) {
                best = Some((c.as_str(), n));
            }
        }
        best.map(|(c, _)| c)
    }
}

pub fn descriptive_stats(dataset: &Dataset) -> Result<StatsSummary, DataError> {
    if dataset.is_empty() {
        return Err(DataError::EmptyDataset);
    }
    let mut continuous = BTreeMap::new();
    let mut categorical = BTreeMap::new();
    let mut category_order = BTreeMap::new();
    for spec in dataset.schema().features() {
        match &spec.kind {
            FeatureKind::Continuous { range: [lo, hi] } => {
                let values: Vec<f64> = dataset
                    .records()
                    .iter()
                    .filter_map(|r| r.number(&spec.name))
                    .collect();
                let summary = if values.is_empty() {
                    ContinuousSummary {
                        count: 0,
                        mean: f64::NAN,
                        std: f64::NAN,
                        min: f64::NAN,
                        max: f64::NAN,
                        histogram: Histogram::over_range(*lo, *hi, &[]),
                    }
                } else {
                    ContinuousSummary {
                        count: values.len(),
                        mean: math::mean(&values),
                        std: math::std_population(&values),
                        min: values.iter().copied().fold(f64::INFINITY, f64::min),
                        max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                        histogram: Histogram::over_range(*lo, *hi, &values),
                    }
                };
                continuous.insert(spec.name.clone(), summary);
            }
            FeatureKind::Categorical { categories } => {
                let mut table: BTreeMap<String, usize> =
                    categories.iter().map(|c| (c.clone(), 0)).collect();
                for r in dataset.records() {
                    if let Some(c) = r.category(&spec.name) {
                        *table.entry(c.into()).or_insert(0) += 1;
                    }
                }
                categorical.insert(spec.name.clone(), table);
                category_order.insert(spec.name.clone(), categories.clone());
            }
        }
    }
    let labels: Vec<bool> = dataset.records().iter().filter_map(evaluable_label).collect();
    let survived_5y_rate = if labels.is_empty() {
        None
    } else {
        Some(labels.iter().filter(|&&l| l).count() as f64 / labels.len() as f64)
    };
    Ok(StatsSummary {
        window_label: dataset.window_label().into(),
        record_count: dataset.len(),
        continuous,
        categorical,
        labeled_count: labels.len(),
        survived_5y_rate,
        category_order,
    })
}
