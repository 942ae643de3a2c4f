use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{bayes_opt, initial_design_size, random_search, SearchMethod, TunerError, TunerResult};
use crate::data::Dataset;
use crate::model::{evaluate, train_model, Family, Metrics, ModelArtifact};
use crate::rng;
use crate::space::Hyperparams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationProtocol {
    /// Always `validation_auc`: AUC of the model trained on `train_window`
    /// and scored on `validation_window`.
    pub objective: String,
    pub train_window: String,
    pub validation_window: String,
    pub n_train: usize,
    pub n_validation: usize,
    pub budget_per_family: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyOutcome {
    pub family: Family,
    pub method: SearchMethod,
    pub result: Option<TunerResult>,
    pub failure: Option<String>,
    /// Validation metrics of the family's best model.
    pub validation_metrics: Option<Metrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub families: Vec<FamilyOutcome>,
    pub chosen_family: Family,
    pub chosen_hyperparams: Hyperparams,
    pub chosen_score: f64,
    pub protocol: ValidationProtocol,
}

/// The report together with the best trained model of every family that
/// produced one.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub report: SelectionReport,
    pub models: BTreeMap<Family, ModelArtifact>,
}

impl Selection {
    pub fn chosen_model(&self) -> &ModelArtifact {
        &self.models[&self.report.chosen_family]
    }
}

/// Tunes each family on validation AUC and picks the best family. Bayesian
/// optimisation is used when the budget covers its initial design plus one
/// step, random search otherwise. Ties go to the earlier family in
/// [`Family::ALL`] (logistic first).
pub fn select_model(
    train: &Dataset,
    validation: &Dataset,
    families: &[Family],
    budget_per_family: usize,
    seed: u64,
) -> Result<Selection, TunerError> {
    let mut ordered: Vec<Family> = families.to_vec();
    ordered.sort();
    ordered.dedup();
    if ordered.is_empty() {
        return Err(TunerError::NoFamilies);
    }
    let mut outcomes = Vec::new();
    let mut models = BTreeMap::new();
    let mut failures = Vec::new();

    for family in ordered {
        let family_seed = rng::derive(seed, family as u64);
        let train_seeds = rng::derive(family_seed, u32::MAX as u64);
        let space = family.search_space();
        let mut best: Option<(f64, ModelArtifact, Metrics)> = None;
        let mut counter = 0u64;
        let objective = |h: &Hyperparams| -> Result<f64, String> {
            let train_seed = rng::derive(train_seeds, counter);
            counter += 1;
            let model = train_model(family, train, h, train_seed).map_err(|e| e.to_string())?;
            let metrics = evaluate(&model, validation).map_err(|e| e.to_string())?;
            let score = metrics.auc;
            if best.as_ref().map_or(true, |(b, _, _)| score > *b) {
                best = Some((score, model, metrics));
            }
            Ok(score)
        };
        let method = if budget_per_family > initial_design_size(&space) {
            SearchMethod::BayesOpt
        } else {
            SearchMethod::RandomSearch
        };
        let result = match method {
            SearchMethod::BayesOpt => bayes_opt(&space, objective, budget_per_family, family_seed),
            SearchMethod::RandomSearch => random_search(&space, objective, budget_per_family, family_seed),
        };
        match result {
            Ok(result) => {
                let (_, model, metrics) = best.expect("a successful trial stored its model");
                models.insert(family, model);
                outcomes.push(FamilyOutcome {
                    family,
                    method,
                    result: Some(result),
                    failure: None,
                    validation_metrics: Some(metrics),
                });
            }
            Err(e) => {
                failures.push(format!("{family}: {e}"));
                outcomes.push(FamilyOutcome {
                    family,
                    method,
                    result: None,
                    failure: Some(e.to_string()),
                    validation_metrics: None,
                });
            }
        }
    }

    let mut chosen: Option<&TunerResult> = None;
    let mut chosen_family = None;
    for o in &outcomes {
        if let Some(r) = &o.result {
            if chosen.map_or(true, |c| r.best_score > c.best_score) {
                chosen = Some(r);
                chosen_family = Some(o.family);
            }
        }
    }
    let (Some(chosen), Some(chosen_family)) = (chosen, chosen_family) else {
        return Err(TunerError::NoFamilySucceeded(failures.join("; ")));
    };
    let report = SelectionReport {
        chosen_family,
        chosen_hyperparams: chosen.best_hyperparams.clone(),
        chosen_score: chosen.best_score,
        protocol: ValidationProtocol {
            objective: "validation_auc".into(),
            train_window: train.window_label().into(),
            validation_window: validation.window_label().into(),
            n_train: train.len(),
            n_validation: validation.len(),
            budget_per_family,
            seed,
        },
        families: outcomes,
    };
    Ok(Selection { report, models })
}
