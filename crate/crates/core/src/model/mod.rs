//! Prognosis models: training, prediction with uncertainty, evaluation and
//! explanation.
//!
//! Two families are available. `Logistic` is L2-regularised logistic
//! regression on standardised features; `TreeEnsemble` is bagged CART.
//! Either family can be wrapped in a bootstrap [`EnsembleArtifact`] whose
//! member disagreement is reported as epistemic uncertainty.

pub mod encode;
mod explain;
pub mod logistic;
mod metrics;
pub mod tree;

pub use explain::{instance_attribution, permutation_importance};
pub use metrics::{evaluate, Metrics};

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{evaluable_label, DataError, Dataset, FeatureSchema, PatientRecord, StatsSummary};
use crate::space::{Dimension, HyperValue, Hyperparams, Scale, SearchSpace};
use crate::{math, rng};
use encode::FeatureEncoder;
use logistic::DescentOptions;
use tree::{Tree, TreeOptions};

/// Emitted probabilities are clipped to `[PROBABILITY_FLOOR, 1 - PROBABILITY_FLOOR]`.
pub const PROBABILITY_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("hyperparameters outside the {family} search space: {detail}")]
    InvalidHyperparams { family: Family, detail: String },
    #[error("training labels contain a single class")]
    SingleClass,
    #[error("no records with a usable 5-year label")]
    NoLabeledRecords,
    #[error("patient {patient_id} has no outcome to evaluate against")]
    UnlabeledRecord { patient_id: String },
    #[error("gradient descent did not converge after {iterations} iterations (|grad|inf = {gradient_norm:e})")]
    NotConverged { iterations: usize, gradient_norm: f64 },
    #[error("record does not match the model schema: {0}")]
    SchemaMismatch(DataError),
    #[error("dataset schema differs from the model schema")]
    DatasetSchemaMismatch,
    #[error("ensemble needs at least two members, got {0}")]
    EnsembleTooSmall(usize),
    #[error("ensemble members disagree on {0}")]
    InconsistentEnsemble(&'static str),
    #[error("permutation importance needs at least one repeat")]
    NoRepeats,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Logistic,
    TreeEnsemble,
}

impl Family {
    /// Canonical order; also the tie-break order for model selection.
    pub const ALL: [Family; 2] = [Family::Logistic, Family::TreeEnsemble];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Logistic => "logistic",
            Family::TreeEnsemble => "tree_ensemble",
        }
    }

    pub fn parse(s: &str) -> Option<Family> {
        match s {
            "logistic" => Some(Family::Logistic),
            "tree_ensemble" | "tree" => Some(Family::TreeEnsemble),
            _ => None,
        }
    }

    pub fn search_space(self) -> SearchSpace {
        let dims = match self {
            Family::Logistic => vec![Dimension::continuous("l2", 1e-3, 1e3, Scale::Log)],
            Family::TreeEnsemble => vec![
                Dimension::continuous("n_trees", 5.0, 40.0, Scale::Linear),
                Dimension::continuous("max_depth", 2.0, 6.0, Scale::Linear),
                Dimension::continuous("min_leaf", 2.0, 64.0, Scale::Log),
            ],
        };
        SearchSpace::new(dims).expect("family spaces are valid")
    }

    pub fn default_hyperparams(self) -> Hyperparams {
        let pairs: &[(&str, f64)] = match self {
            Family::Logistic => &[("l2", 1.0)],
            Family::TreeEnsemble => &[("n_trees", 25.0), ("max_depth", 4.0), ("min_leaf", 10.0)],
        };
        pairs.iter().map(|(k, v)| ((*k).into(), HyperValue::Real(*v))).collect()
    }
}

impl core::fmt::Display for Family {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ModelParameters {
    Logistic { weights: Vec<f64>, intercept: f64 },
    TreeEnsemble { trees: Vec<Tree> },
}

/// Serialised model format version.
pub const ARTIFACT_FORMAT: u32 = 1;

/// A trained model `theta_T`. Carries the train-time encoder so prediction
/// always standardises with training-window statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub format: u32,
    pub version_id: String,
    pub family: Family,
    pub hyperparams: Hyperparams,
    pub schema: FeatureSchema,
    pub encoder: FeatureEncoder,
    pub parameters: ModelParameters,
    pub train_window: String,
    pub trained_at_step: u64,
    pub train_seed: u64,
    pub metrics_at_train: Metrics,
}

fn real(params: &Hyperparams, key: &str) -> f64 {
    match params.get(key) {
        Some(HyperValue::Real(v)) => *v,
        _ => f64::NAN,
    }
}

fn labeled_rows(dataset: &Dataset) -> (Vec<&PatientRecord>, Vec<bool>) {
    dataset
        .records()
        .iter()
        .filter_map(|r| evaluable_label(r).map(|l| (r, l)))
        .unzip()
}

fn fingerprint(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    let digest = h.finalize();
    digest.iter().take(6).map(|b| format!("{b:02x}")).collect()
}

fn parameter_bytes(p: &ModelParameters) -> Vec<u8> {
    let mut out = Vec::new();
    match p {
        ModelParameters::Logistic { weights, intercept } => {
            for v in weights.iter().chain(core::iter::once(intercept)) {
                out.extend_from_slice(&v.to_bits().to_le_bytes());
            }
        }
        ModelParameters::TreeEnsemble { trees } => {
            for t in trees {
                for n in &t.nodes {
                    match n {
                        tree::Node::Leaf { probability } => out.extend_from_slice(&probability.to_bits().to_le_bytes()),
                        tree::Node::Split { column, threshold, left, right } => {
                            for v in [*column as u64, threshold.to_bits(), *left as u64, *right as u64] {
                                out.extend_from_slice(&v.to_le_bytes());
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// Fits one model of `family` on the labelled records of `dataset`.
pub fn train_model(
    family: Family,
    dataset: &Dataset,
    hyperparams: &Hyperparams,
    seed: u64,
) -> Result<ModelArtifact, ModelError> {
    let space = family.search_space();
    if !space.contains(hyperparams) {
        return Err(ModelError::InvalidHyperparams {
            family,
            detail: format!("{hyperparams:?}"),
        });
    }
    let (records, labels) = labeled_rows(dataset);
    if records.is_empty() {
        return Err(ModelError::NoLabeledRecords);
    }
    if labels.iter().all(|&l| l) || labels.iter().all(|&l| !l) {
        return Err(ModelError::SingleClass);
    }
    let encoder = FeatureEncoder::fit(dataset.schema(), records.iter().copied());
    let x = encoder.design(records.iter().copied());
    let parameters = match family {
        Family::Logistic => {
            let y: Vec<f64> = labels.iter().map(|&l| if l { 1.0 } else { 0.0 }).collect();
            let fit = logistic::fit(&x, &y, real(hyperparams, "l2"), DescentOptions::default())?;
            ModelParameters::Logistic {
                weights: fit.weights,
                intercept: fit.intercept,
            }
        }
        Family::TreeEnsemble => {
            let options = TreeOptions {
                n_trees: libm::round(real(hyperparams, "n_trees")) as usize,
                max_depth: libm::round(real(hyperparams, "max_depth")) as usize,
                min_leaf: libm::round(real(hyperparams, "min_leaf")) as usize,
            };
            ModelParameters::TreeEnsemble {
                trees: tree::fit_forest(&x, &labels, options, seed),
            }
        }
    };
    let version_id = format!(
        "{}-{}",
        match family {
            Family::Logistic => "lr",
            Family::TreeEnsemble => "te",
        },
        fingerprint(&[
            family.as_str().as_bytes(),
            dataset.window_label().as_bytes(),
            &seed.to_le_bytes(),
            &parameter_bytes(&parameters),
        ])
    );
    let mut artifact = ModelArtifact {
        format: ARTIFACT_FORMAT,
        version_id,
        family,
        hyperparams: hyperparams.clone(),
        schema: dataset.schema().clone(),
        encoder,
        parameters,
        train_window: dataset.window_label().into(),
        trained_at_step: 0,
        train_seed: seed,
        metrics_at_train: Metrics::default(),
    };
    artifact.metrics_at_train = evaluate(&artifact, dataset)?;
    Ok(artifact)
}

impl ModelArtifact {
    /// Raw probability for a record already canonical under `self.schema`.
    pub fn raw_probability(&self, record: &PatientRecord) -> f64 {
        let x = self.encoder.encode(record);
        let p = match &self.parameters {
            ModelParameters::Logistic { weights, intercept } => math::sigmoid(logistic::dot(&x, weights) + intercept),
            ModelParameters::TreeEnsemble { trees } => {
                if trees.is_empty() {
                    0.5
                } else {
                    trees.iter().map(|t| t.predict(&x)).sum::<f64>() / trees.len() as f64
                }
            }
        };
        clip(p)
    }

    pub fn is_finite(&self) -> bool {
        match &self.parameters {
            ModelParameters::Logistic { weights, intercept } => {
                intercept.is_finite() && weights.iter().all(|w| w.is_finite())
            }
            ModelParameters::TreeEnsemble { trees } => trees.iter().all(|t| {
                t.nodes.iter().all(|n| match n {
                    tree::Node::Leaf { probability } => probability.is_finite(),
                    tree::Node::Split { threshold, .. } => threshold.is_finite(),
                })
            }),
        }
    }
}

fn clip(p: f64) -> f64 {
    p.clamp(PROBABILITY_FLOOR, 1.0 - PROBABILITY_FLOOR)
}

/// `M >= 2` models of one family trained on bootstrap resamples of one window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleArtifact {
    pub version_id: String,
    pub members: Vec<ModelArtifact>,
}

impl EnsembleArtifact {
    pub fn new(members: Vec<ModelArtifact>) -> Result<Self, ModelError> {
        if members.len() < 2 {
            return Err(ModelError::EnsembleTooSmall(members.len()));
        }
        let first = &members[0];
        for m in &members[1..] {
            if m.family != first.family {
                return Err(ModelError::InconsistentEnsemble("family"));
            }
            if m.hyperparams != first.hyperparams {
                return Err(ModelError::InconsistentEnsemble("hyperparameters"));
            }
            if m.train_window != first.train_window {
                return Err(ModelError::InconsistentEnsemble("training window"));
            }
            if m.schema != first.schema {
                return Err(ModelError::InconsistentEnsemble("schema"));
            }
        }
        let ids: Vec<&[u8]> = members.iter().map(|m| m.version_id.as_bytes()).collect();
        let version_id = format!(
            "{}x{}-{}",
            match first.family {
                Family::Logistic => "lr",
                Family::TreeEnsemble => "te",
            },
            members.len(),
            fingerprint(&ids)
        );
        Ok(Self { version_id, members })
    }

    /// Trains `size` members, each on a bootstrap resample of the labelled
    /// records of `dataset`.
    pub fn bootstrap(
        family: Family,
        dataset: &Dataset,
        hyperparams: &Hyperparams,
        size: usize,
        seed: u64,
    ) -> Result<Self, ModelError> {
        if size < 2 {
            return Err(ModelError::EnsembleTooSmall(size));
        }
        let labeled = dataset.labeled();
        if labeled.is_empty() {
            return Err(ModelError::NoLabeledRecords);
        }
        let n = labeled.len();
        let mut members = Vec::with_capacity(size);
        for m in 0..size {
            let member_seed = rng::derive(seed, m as u64);
            let mut r = rng::seeded(member_seed);
            let indices: Vec<usize> = (0..n).map(|_| r.random_range(0..n)).collect();
            let resample = labeled.subset(&indices, dataset.window_label());
            members.push(train_model(family, &resample, hyperparams, member_seed)?);
        }
        Self::new(members)
    }

    pub fn family(&self) -> Family {
        self.members[0].family
    }
}

/// What a scorer needs to provide; prediction, evaluation and explanation
/// work over any of them.
pub trait Scorer {
    fn version_id(&self) -> &str;
    fn schema(&self) -> &FeatureSchema;
    /// Per-member probabilities for a canonical record.
    fn member_probabilities(&self, record: &PatientRecord) -> Vec<f64>;

    fn probability(&self, record: &PatientRecord) -> f64 {
        let members = self.member_probabilities(record);
        clip(members.iter().sum::<f64>() / members.len() as f64)
    }
}

impl Scorer for ModelArtifact {
    fn version_id(&self) -> &str {
        &self.version_id
    }
    fn schema(&self) -> &FeatureSchema {
        &self.schema
    }
    fn member_probabilities(&self, record: &PatientRecord) -> Vec<f64> {
        vec![self.raw_probability(record)]
    }
}

impl Scorer for EnsembleArtifact {
    fn version_id(&self) -> &str {
        &self.version_id
    }
    fn schema(&self) -> &FeatureSchema {
        &self.members[0].schema
    }
    fn member_probabilities(&self, record: &PatientRecord) -> Vec<f64> {
        self.members.iter().map(|m| m.raw_probability(record)).collect()
    }
}

/// A registry entry: either a single model or a bootstrap ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ServedModel {
    Single(ModelArtifact),
    Ensemble(EnsembleArtifact),
}

impl ServedModel {
    pub fn family(&self) -> Family {
        match self {
            ServedModel::Single(m) => m.family,
            ServedModel::Ensemble(e) => e.family(),
        }
    }

    pub fn primary(&self) -> &ModelArtifact {
        match self {
            ServedModel::Single(m) => m,
            ServedModel::Ensemble(e) => &e.members[0],
        }
    }
}

impl Scorer for ServedModel {
    fn version_id(&self) -> &str {
        match self {
            ServedModel::Single(m) => m.version_id(),
            ServedModel::Ensemble(e) => e.version_id(),
        }
    }
    fn schema(&self) -> &FeatureSchema {
        match self {
            ServedModel::Single(m) => m.schema(),
            ServedModel::Ensemble(e) => e.schema(),
        }
    }
    fn member_probabilities(&self, record: &PatientRecord) -> Vec<f64> {
        match self {
            ServedModel::Single(m) => m.member_probabilities(record),
            ServedModel::Ensemble(e) => e.member_probabilities(record),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Uncertainty {
    /// `min(p, 1 - p)`: small when the larger class probability is large.
    pub aleatoric: f64,
    /// Population standard deviation of member probabilities.
    pub epistemic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub survival_probability: f64,
    pub uncertainty: Uncertainty,
    pub attribution: BTreeMap<String, f64>,
    pub model_version: String,
    pub step: u64,
}

pub fn predict<S: Scorer + ?Sized>(
    model: &S,
    record: &PatientRecord,
    reference_stats: &StatsSummary,
    step: u64,
) -> Result<Prediction, ModelError> {
    let record = model.schema().validate(record).map_err(ModelError::SchemaMismatch)?;
    let members = model.member_probabilities(&record);
    let p = clip(members.iter().sum::<f64>() / members.len() as f64);
    let epistemic = if members.len() < 2 { 0.0 } else { math::std_population(&members) };
    Ok(Prediction {
        survival_probability: p,
        uncertainty: Uncertainty {
            aleatoric: p.min(1.0 - p),
            epistemic,
        },
        attribution: explain::occlusion(model, &record, reference_stats),
        model_version: model.version_id().into(),
        step,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{
        descriptive_stats, generate_synthetic_cohort, FeatureKind, FeatureSpec, FeatureValue, Outcome,
        SyntheticConfig, VitalStatus,
    };

    pub(crate) fn toy_dataset(n: usize) -> Dataset {
        let schema = FeatureSchema::new(vec![FeatureSpec::continuous("x", "", -10.0, 10.0)]).unwrap();
        let records = (0..n)
            .map(|i| {
                let x = -5.0 + 10.0 * (i as f64 + 0.5) / n as f64;
                let mut features = BTreeMap::new();
                features.insert("x".into(), FeatureValue::Number(x));
                PatientRecord {
                    patient_id: format!("t{i}"),
                    diagnosis_year: 2000,
                    features,
                    outcome: Some(Outcome {
                        survival_months: if x > 0.0 { 100 } else { 10 },
                        event: if x > 0.0 { VitalStatus::AliveOrCensored } else { VitalStatus::DiedOfDisease },
                        decision: "surgery".into(),
                        recorded_at_step: 0,
                    }),
                }
            })
            .collect();
        Dataset::new(schema, records, "toy").unwrap()
    }

    pub(crate) fn small_cohort(seed: u64) -> Dataset {
        let mut cfg = SyntheticConfig::null_drift();
        cfg.years = 2;
        cfg.patients_per_year = 300;
        cfg.seed = seed;
        generate_synthetic_cohort(&cfg).unwrap()
    }

    fn logistic_with(weights: Vec<f64>, intercept: f64, dataset: &Dataset) -> ModelArtifact {
        let mut m = train_model(Family::Logistic, dataset, &Family::Logistic.default_hyperparams(), 0).unwrap();
        m.parameters = ModelParameters::Logistic { weights, intercept };
        m
    }

    #[test]
    fn separable_toy_learns_positive_weight() {
        let d = toy_dataset(100);
        let mut hp = Family::Logistic.default_hyperparams();
        hp.insert("l2".into(), HyperValue::Real(1e-3));
        let m = train_model(Family::Logistic, &d, &hp, 1).unwrap();
        let ModelParameters::Logistic { weights, .. } = &m.parameters else { panic!() };
        assert!(weights[0] > 0.0);
        assert!(m.metrics_at_train.auc >= 0.99);
    }

    #[test]
    fn ridge_limit_shrinks_weights() {
        let d = small_cohort(5);
        let mut hp = Hyperparams::new();
        hp.insert("l2".into(), HyperValue::Real(1e3));
        // 1e6 lies outside the tuned space; go through the solver directly
        let (records, labels) = labeled_rows(&d);
        let enc = FeatureEncoder::fit(d.schema(), records.iter().copied());
        let x = enc.design(records.iter().copied());
        let y: Vec<f64> = labels.iter().map(|&l| l as u8 as f64).collect();
        let fit = logistic::fit(&x, &y, 1e6, DescentOptions::default()).unwrap();
        assert!(fit.weights.iter().all(|w| w.abs() <= 0.01), "{:?}", fit.weights);
        assert!(train_model(Family::Logistic, &d, &hp, 0).is_ok());
    }

    #[test]
    fn training_is_deterministic_per_seed() {
        let d = small_cohort(2);
        for family in Family::ALL {
            let hp = family.default_hyperparams();
            let a = train_model(family, &d, &hp, 42).unwrap();
            let b = train_model(family, &d, &hp, 42).unwrap();
            assert_eq!(a, b);
            assert!(a.is_finite());
        }
        let hp = Family::TreeEnsemble.default_hyperparams();
        assert_ne!(
            train_model(Family::TreeEnsemble, &d, &hp, 1).unwrap().version_id,
            train_model(Family::TreeEnsemble, &d, &hp, 2).unwrap().version_id
        );
    }

    #[test]
    fn single_class_is_rejected() {
        let d = toy_dataset(10);
        let idx: Vec<usize> = (5..10).collect();
        let one_class = d.subset(&idx, "pos");
        assert_eq!(
            train_model(Family::Logistic, &one_class, &Family::Logistic.default_hyperparams(), 0),
            Err(ModelError::SingleClass)
        );
    }

    #[test]
    fn out_of_space_hyperparams_are_rejected() {
        let d = toy_dataset(10);
        let mut hp = Hyperparams::new();
        hp.insert("l2".into(), HyperValue::Real(-1.0));
        assert!(matches!(
            train_model(Family::Logistic, &d, &hp, 0),
            Err(ModelError::InvalidHyperparams { .. })
        ));
    }

    #[test]
    fn zero_weights_predict_one_half() {
        let d = small_cohort(3);
        let stats = descriptive_stats(&d).unwrap();
        let width = match &train_model(Family::Logistic, &d, &Family::Logistic.default_hyperparams(), 0)
            .unwrap()
            .parameters
        {
            ModelParameters::Logistic { weights, .. } => weights.len(),
            _ => unreachable!(),
        };
        let m = logistic_with(vec![0.0; width], 0.0, &d);
        let p = predict(&m, &d.records()[0], &stats, 1).unwrap();
        assert_eq!(p.survival_probability, 0.5);
        assert_eq!(p.uncertainty.aleatoric, 0.5);
        assert_eq!(p.uncertainty.epistemic, 0.0);
    }

    #[test]
    fn copied_members_have_zero_epistemic() {
        let d = small_cohort(4);
        let stats = descriptive_stats(&d).unwrap();
        let m = train_model(Family::Logistic, &d, &Family::Logistic.default_hyperparams(), 0).unwrap();
        let e = EnsembleArtifact::new(vec![m.clone(), m.clone(), m]).unwrap();
        for r in d.records().iter().take(20) {
            assert_eq!(predict(&e, r, &stats, 0).unwrap().uncertainty.epistemic, 0.0);
        }
    }

    #[test]
    fn larger_tumours_lower_survival_when_weight_negative() {
        let d = small_cohort(6);
        let stats = descriptive_stats(&d).unwrap();
        let m = train_model(Family::Logistic, &d, &Family::Logistic.default_hyperparams(), 0).unwrap();
        let col = m.encoder.columns.iter().position(|c| c.feature() == "tumour_size").unwrap();
        let ModelParameters::Logistic { weights, .. } = &m.parameters else { panic!() };
        assert!(weights[col] < 0.0);
        let mut r = d.records()[0].clone();
        let mut last = f64::INFINITY;
        for size in [5.0, 15.0, 30.0, 60.0, 120.0] {
            r.features.insert("tumour_size".into(), FeatureValue::Number(size));
            let p = predict(&m, &r, &stats, 0).unwrap().survival_probability;
            assert!(p < last);
            last = p;
        }
    }

    #[test]
    fn prediction_uses_training_statistics() {
        let train = small_cohort(7);
        let m = train_model(Family::Logistic, &train, &Family::Logistic.default_hyperparams(), 0).unwrap();
        let mut shifted_cfg = SyntheticConfig::null_drift();
        shifted_cfg.years = 1;
        shifted_cfg.patients_per_year = 200;
        shifted_cfg.base.tumour_size_mean = 60.0;
        let shifted = generate_synthetic_cohort(&shifted_cfg).unwrap();
        let train_stats = descriptive_stats(&train).unwrap();
        let Some(encode::Column::Standardized { mean, std, .. }) =
            m.encoder.columns.iter().find(|c| c.feature() == "tumour_size")
        else {
            panic!()
        };
        assert_eq!(*mean, train_stats.continuous["tumour_size"].mean);
        assert_eq!(*std, train_stats.continuous["tumour_size"].std);
        // scoring another window leaves the stored statistics in place
        let before = m.clone();
        let _ = evaluate(&m, &shifted).unwrap();
        assert_eq!(m, before);
    }

    #[test]
    fn schema_mismatch_on_predict() {
        let d = small_cohort(8);
        let stats = descriptive_stats(&d).unwrap();
        let m = train_model(Family::Logistic, &d, &Family::Logistic.default_hyperparams(), 0).unwrap();
        let mut r = d.records()[0].clone();
        r.features.remove("grade");
        assert!(matches!(predict(&m, &r, &stats, 0), Err(ModelError::SchemaMismatch(_))));
        let _ = FeatureKind::Continuous { range: [0.0, 1.0] };
    }

    #[test]
    fn bootstrap_members_differ() {
        let d = small_cohort(9);
        let e = EnsembleArtifact::bootstrap(Family::Logistic, &d, &Family::Logistic.default_hyperparams(), 4, 3).unwrap();
        assert_eq!(e.members.len(), 4);
        assert_ne!(e.members[0].parameters, e.members[1].parameters);
        assert!(EnsembleArtifact::bootstrap(Family::Logistic, &d, &Family::Logistic.default_hyperparams(), 1, 3).is_err());
    }
}
