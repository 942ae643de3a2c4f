//! Commands that turn requests into lifecycle events.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{
    evaluate_triggers, BatchPayload, DismissedPayload, DriftPayload, Event, EventKind, ExperimentReport,
    LifecycleError, LifecycleState, OutcomePayload, PredictPayload, PromotedPayload, PromotionEvidence,
    ReferencePayload, ReferenceSource, RetrainFailedPayload, RetrainPayload, RetrainPolicy, RollingMetrics,
    UncertaintySummary,
};
use crate::data::{descriptive_stats, DataError, Dataset, FeatureSchema, Outcome, PatientRecord, StatsSummary};
use crate::drift::{drift_report, DriftError, DriftReport, ReportLabels, ScoreSamples, DETECTION_FOLDS};
use crate::math;
use crate::model::{self, train_model, EnsembleArtifact, Family, ModelError, Prediction, Scorer, ServedModel};
use crate::rng;
use crate::tuner::{select_model, SelectionReport};

/// Labelled records a retrain needs before it is attempted.
pub const MIN_RETRAIN_RECORDS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MachineConfig {
    /// Bootstrap members per candidate; 1 trains a single model.
    pub ensemble_size: usize,
    pub families: Vec<Family>,
    pub budget_per_family: usize,
    pub seed: u64,
}

impl Default for MachineConfig {
    fn default() -> Self {
        Self {
            ensemble_size: 5,
            families: Family::ALL.to_vec(),
            budget_per_family: 8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MachineError {
    #[error("invalid record: {0}")]
    Invalid(#[from] DataError),
    #[error("no champion is deployed")]
    NoChampion,
    #[error("unknown model {0}")]
    UnknownModel(String),
    #[error("a reference needs at least {minimum} records, got {got}")]
    ReferenceTooSmall { got: usize, minimum: usize },
    #[error("promotion rejected: candidate shadow AUC {} vs champion {} on {} records (need {} and a strict improvement)",
        show_auc(.0.candidate_auc), show_auc(.0.champion_auc), .0.n_records, .0.min_outcomes)]
    PromotionRejected(PromotionEvidence),
    #[error("retraining failed: {0}")]
    RetrainFailed(String),
    #[error(transparent)]
    Lifecycle(#[from] LifecycleError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Drift(#[from] DriftError),
    #[error("event {index}: {error}")]
    Replay { index: u64, error: LifecycleError },
}

/// Challenger output for one request, kept only in the event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ShadowOutcome {
    Scored { probability: f64, epistemic: f64 },
    Failed { error: String },
}

/// What the caller of predict receives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionResponse {
    pub request_id: String,
    pub step: u64,
    pub prediction: Prediction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectedRow {
    /// Position in the submitted batch.
    pub row: usize,
    pub patient_id: Option<String>,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowProgress {
    pub buffered: usize,
    pub window_size: usize,
    /// Records still needed before the next drift report.
    pub until_next_report: usize,
    pub reference_designated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub dataset_id: Option<String>,
    pub submitted: usize,
    pub accepted: usize,
    pub rejected: Vec<RejectedRow>,
    /// Drift reports this batch completed.
    pub reports: Vec<String>,
    pub retrain_requested: bool,
    pub drift_error: Option<String>,
    pub window: WindowProgress,
}

/// Everything the log has carried in, indexed for lookups.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Registry {
    pub models: BTreeMap<String, ServedModel>,
    /// Occlusion baseline per model.
    pub model_stats: BTreeMap<String, StatsSummary>,
    pub datasets: BTreeMap<String, Vec<PatientRecord>>,
    pub references: BTreeMap<String, Dataset>,
    pub reports: Vec<DriftReport>,
    pub selections: Vec<SelectionReport>,
    pub experiments: BTreeMap<String, ExperimentReport>,
    pub promotions: Vec<PromotedPayload>,
    /// Records served by predict, by request id.
    pub requests: BTreeMap<String, PatientRecord>,
    /// Training pool: batches, inline references and predicted records
    /// whose outcome arrived, in log order.
    pub history: Vec<PatientRecord>,
}

impl Registry {
    pub fn report(&self, id: &str) -> Option<&DriftReport> {
        self.reports.iter().find(|r| r.id == id)
    }
}

/// Chronological 80/20 split of the labelled records by diagnosis year.
pub fn history_split(dataset: &Dataset) -> (Dataset, Dataset) {
    let sorted = dataset.labeled().chronological();
    let n = sorted.len();
    let cut = if n < 2 { n } else { (n * 4 / 5).clamp(1, n - 1) };
    let train: Vec<usize> = (0..cut).collect();
    let validation: Vec<usize> = (cut..n).collect();
    let label = dataset.window_label();
    (
        sorted.subset(&train, format!("{label}/train")),
        sorted.subset(&validation, format!("{label}/validation")),
    )
}

fn show_auc(auc: Option<f64>) -> String {
    auc.map_or_else(|| "n/a".into(), |a| format!("{a:.4}"))
}

fn spread(members: &[f64]) -> f64 {
    if members.len() < 2 {
        0.0
    } else {
        math::std_population(members)
    }
}

/// Probability and member spread of `model` on `record`.
fn score(model: &ServedModel, record: &PatientRecord) -> (f64, f64) {
    let members = model.member_probabilities(record);
    (model.probability(record), spread(&members))
}

/// Scores `record` with every challenger. A challenger that cannot score
/// the record is reported as failed without affecting the others.
pub fn shadow_score<'a>(
    challengers: impl IntoIterator<Item = &'a ServedModel>,
    record: &PatientRecord,
) -> BTreeMap<String, ShadowOutcome> {
    challengers
        .into_iter()
        .map(|m| {
            let outcome = match m.schema().validate(record) {
                Ok(r) => {
                    let (probability, epistemic) = score(m, &r);
                    ShadowOutcome::Scored { probability, epistemic }
                }
                Err(e) => ShadowOutcome::Failed { error: e.to_string() },
            };
            (m.version_id().into(), outcome)
        })
        .collect()
}

/// Inputs of a retrain, detached from the machine so the expensive part
/// can run without holding it.
#[derive(Debug, Clone)]
pub struct RetrainJob {
    pub history: Dataset,
    pub families: Vec<Family>,
    pub budget_per_family: usize,
    pub ensemble_size: usize,
    pub seed: u64,
    pub step: u64,
}

impl RetrainJob {
    /// Tunes each family on a chronological split of the history, then
    /// refits the best configuration of every family on all of it.
    pub fn run(&self) -> Result<RetrainPayload, String> {
        let labeled = self.history.labeled();
        if labeled.len() < MIN_RETRAIN_RECORDS {
            return Err(format!(
                "insufficient labelled data: {} records, need {MIN_RETRAIN_RECORDS}",
                labeled.len()
            ));
        }
        let (train, validation) = history_split(&labeled);
        let selection = select_model(&train, &validation, &self.families, self.budget_per_family, self.seed)
            .map_err(|e| e.to_string())?;
        let stats = descriptive_stats(&labeled).map_err(|e| e.to_string())?;
        let mut candidates = Vec::new();
        let mut failures = Vec::new();
        for outcome in &selection.report.families {
            let Some(result) = &outcome.result else { continue };
            let family = outcome.family;
            let seed = rng::derive(self.seed, 10 + family as u64);
            let built = if self.ensemble_size >= 2 {
                EnsembleArtifact::bootstrap(family, &labeled, &result.best_hyperparams, self.ensemble_size, seed).map(
                    |mut e| {
                        e.members.iter_mut().for_each(|m| m.trained_at_step = self.step);
                        ServedModel::Ensemble(e)
                    },
                )
            } else {
                train_model(family, &labeled, &result.best_hyperparams, seed).map(|mut m| {
                    m.trained_at_step = self.step;
                    ServedModel::Single(m)
                })
            };
            match built {
                Ok(m) => candidates.push(m),
                Err(e) => failures.push(format!("{family}: {e}")),
            }
        }
        if candidates.is_empty() {
            return Err(format!("no candidate could be refitted: {}", failures.join("; ")));
        }
        Ok(RetrainPayload {
            candidates,
            selection: selection.report,
            training_records: labeled.len(),
            training_stats: stats,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
struct ReferenceScores {
    reference_id: String,
    model_id: String,
    samples: ScoreSamples,
}

/// The lifecycle state, the artifacts its events carried, and the log.
pub struct Machine {
    schema: FeatureSchema,
    config: MachineConfig,
    state: LifecycleState,
    registry: Registry,
    events: Vec<Event>,
    clock: Box<dyn FnMut() -> String + Send>,
    reference_scores: Option<ReferenceScores>,
    experiment_counter: u64,
}

impl core::fmt::Debug for Machine {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("Machine")
            .field("config", &self.config)
            .field("state", &self.state)
            .field("events", &self.events.len())
            .finish_non_exhaustive()
    }
}

fn parse_counter(id: &str, prefix: &str) -> Option<u64> {
    id.strip_prefix(prefix)?.parse().ok()
}

impl Machine {
    pub fn new(schema: FeatureSchema, policy: RetrainPolicy, config: MachineConfig) -> Result<Self, MachineError> {
        policy.validate()?;
        Ok(Self {
            schema,
            config,
            state: LifecycleState::new(policy),
            registry: Registry::default(),
            events: Vec::new(),
            clock: Box::new(|| String::from("1970-01-01T00:00:00Z")),
            reference_scores: None,
            experiment_counter: 0,
        })
    }

    /// Source of `recorded_at` and report timestamps.
    pub fn with_clock(mut self, clock: impl FnMut() -> String + Send + 'static) -> Self {
        self.clock = Box::new(clock);
        self
    }

    /// Rebuilds a machine from its log alone.
    pub fn replay(
        schema: FeatureSchema,
        policy: RetrainPolicy,
        config: MachineConfig,
        events: impl IntoIterator<Item = Event>,
    ) -> Result<Self, MachineError> {
        let mut m = Self::new(schema, policy, config)?;
        for e in events {
            let index = e.index;
            m.absorb(e).map_err(|error| match error {
                MachineError::Lifecycle(error) => MachineError::Replay { index, error },
                other => other,
            })?;
        }
        Ok(m)
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn config(&self) -> &MachineConfig {
        &self.config
    }

    pub fn state(&self) -> &LifecycleState {
        &self.state
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn champion(&self) -> Option<&ServedModel> {
        self.state.champion.as_ref().map(|id| &self.registry.models[id])
    }

    pub fn rolling_metrics(&self) -> RollingMetrics {
        RollingMetrics::from_state(&self.state)
    }

    /// All records in the training pool as one dataset.
    pub fn history(&self) -> Result<Dataset, MachineError> {
        Ok(Dataset::new(self.schema.clone(), self.registry.history.clone(), "history")?)
    }

    /// Applies an event to the state, then records what it carried.
    pub fn absorb(&mut self, event: Event) -> Result<(), MachineError> {
        if let EventKind::ReferenceDesignated(r) = &event.kind {
            // resolve before the state changes so a bad inline set is rejected whole
            self.reference_records(&r.source)?;
        }
        self.state.apply(&event)?;
        let reg = &mut self.registry;
        match &event.kind {
            EventKind::PredictRequested(p) => {
                reg.requests.insert(p.request_id.clone(), p.record.clone());
            }
            EventKind::OutcomePosted(o) => {
                let mut record = reg.requests[&o.request_id].clone();
                record.outcome = self.state.predictions[&o.request_id].outcome.clone();
                reg.history.push(record);
            }
            EventKind::BatchIngested(b) => {
                reg.datasets.insert(b.dataset_id.clone(), b.records.clone());
                reg.history.extend(b.records.iter().cloned());
            }
            EventKind::ReferenceDesignated(r) => {
                let records = match &r.source {
                    ReferenceSource::Logged { dataset_id } => reg.datasets[dataset_id].clone(),
                    ReferenceSource::Inline { records } => {
                        reg.history.extend(records.iter().cloned());
                        records.clone()
                    }
                };
                let dataset = Dataset::new(self.schema.clone(), records, r.reference_id.clone())?;
                reg.references.insert(r.reference_id.clone(), dataset);
            }
            EventKind::DriftReportComputed(d) => reg.reports.push(d.report.clone()),
            EventKind::RetrainStarted(r) => {
                for c in &r.candidates {
                    let id = String::from(c.version_id());
                    reg.model_stats.insert(id.clone(), r.training_stats.clone());
                    reg.models.insert(id, c.clone());
                }
                reg.selections.push(r.selection.clone());
            }
            EventKind::Promoted(p) => reg.promotions.push(p.clone()),
            EventKind::RetrainFailed(_) | EventKind::ChallengersDismissed(_) => {}
            EventKind::ExperimentRecorded(e) => {
                if let Some(n) = parse_counter(&e.id, "exp-") {
                    self.experiment_counter = self.experiment_counter.max(n);
                }
                reg.experiments.insert(e.id.clone(), (**e).clone());
            }
        }
        self.events.push(event);
        Ok(())
    }

    fn commit_at(&mut self, kind: EventKind, recorded_at: String) -> Result<&Event, MachineError> {
        let event = Event {
            index: self.state.event_cursor + 1,
            step: self.state.t,
            recorded_at,
            kind,
        };
        self.absorb(event)?;
        Ok(self.events.last().expect("just pushed"))
    }

    fn commit(&mut self, kind: EventKind) -> Result<&Event, MachineError> {
        let now = (self.clock)();
        self.commit_at(kind, now)
    }

    fn reference_records(&self, source: &ReferenceSource) -> Result<Vec<PatientRecord>, MachineError> {
        let records = match source {
            ReferenceSource::Logged { dataset_id } => self
                .registry
                .datasets
                .get(dataset_id)
                .cloned()
                .ok_or_else(|| LifecycleError::UnknownDataset(dataset_id.clone()))?,
            ReferenceSource::Inline { records } => {
                records.iter().map(|r| self.schema.validate(r)).collect::<Result<Vec<_>, _>>()?
            }
        };
        if records.len() < DETECTION_FOLDS {
            return Err(MachineError::ReferenceTooSmall {
                got: records.len(),
                minimum: DETECTION_FOLDS,
            });
        }
        Ok(records)
    }

    /// Serves the champion's prediction and logs challenger scores beside
    /// it. The response never depends on the challengers.
    pub fn predict(&mut self, record: &PatientRecord) -> Result<PredictionResponse, MachineError> {
        let champion_id = self.state.champion.clone().ok_or(MachineError::NoChampion)?;
        let record = self.schema.validate(record)?;
        let champion = &self.registry.models[&champion_id];
        let stats = &self.registry.model_stats[&champion_id];
        let step = self.state.t;
        let prediction = model::predict(champion, &record, stats, step)?;
        let reproducible = model::predict(champion, &record, stats, step).is_ok_and(|p| p == prediction);
        let shadows = shadow_score(self.state.challengers.iter().map(|id| &self.registry.models[id]), &record);
        let request_id = format!("req-{step:06}");
        self.commit(EventKind::PredictRequested(PredictPayload {
            request_id: request_id.clone(),
            record,
            prediction: prediction.clone(),
            shadows,
            reproducible,
        }))?;
        Ok(PredictionResponse {
            request_id,
            step,
            prediction,
        })
    }

    pub fn post_outcome(&mut self, request_id: &str, mut outcome: Outcome) -> Result<(), MachineError> {
        outcome.recorded_at_step = 0;
        self.commit(EventKind::OutcomePosted(OutcomePayload {
            request_id: request_id.into(),
            outcome,
        }))?;
        Ok(())
    }

    /// Validates each row, logs the valid ones as one batch, and computes a
    /// drift report for every full window once a reference exists.
    pub fn ingest_batch(&mut self, records: &[PatientRecord]) -> IngestSummary {
        let mut accepted = Vec::new();
        let mut rejected = Vec::new();
        for (row, r) in records.iter().enumerate() {
            match self.schema.validate(r) {
                Ok(v) => accepted.push(v),
                Err(e) => rejected.push(RejectedRow {
                    row,
                    patient_id: (!r.patient_id.is_empty()).then(|| r.patient_id.clone()),
                    reason: e.to_string(),
                }),
            }
        }
        let n_accepted = accepted.len();
        let mut dataset_id = None;
        if !accepted.is_empty() {
            let id = format!("ds-{:04}", self.state.datasets.len() + 1);
            self.commit(EventKind::BatchIngested(BatchPayload {
                dataset_id: id.clone(),
                records: accepted,
            }))
            .expect("a fresh dataset id is always accepted");
            dataset_id = Some(id);
        }
        let mut reports = Vec::new();
        let mut retrain_requested = false;
        let mut drift_error = None;
        loop {
            match self.next_report() {
                Ok(Some((id, retrain))) => {
                    reports.push(id);
                    retrain_requested |= retrain;
                }
                Ok(None) => break,
                Err(e) => {
                    drift_error = Some(e.to_string());
                    break;
                }
            }
        }
        IngestSummary {
            dataset_id,
            submitted: records.len(),
            accepted: n_accepted,
            rejected,
            reports,
            retrain_requested,
            drift_error,
            window: self.window_progress(),
        }
    }

    pub fn window_progress(&self) -> WindowProgress {
        let size = self.state.policy.window_size;
        let buffered = self.state.window.len();
        WindowProgress {
            buffered,
            window_size: size,
            until_next_report: size.saturating_sub(buffered),
            reference_designated: self.state.reference_id.is_some(),
        }
    }

    fn champion_reference_scores(&mut self, reference_id: &str, model_id: &str) -> ScoreSamples {
        let cached = self
            .reference_scores
            .as_ref()
            .is_some_and(|c| c.reference_id == reference_id && c.model_id == model_id);
        if !cached {
            let model = &self.registry.models[model_id];
            let (p, e): (Vec<f64>, Vec<f64>) = self.registry.references[reference_id]
                .records()
                .iter()
                .map(|r| score(model, r))
                .unzip();
            self.reference_scores = Some(ReferenceScores {
                reference_id: reference_id.into(),
                model_id: model_id.into(),
                samples: ScoreSamples {
                    reference_probabilities: p,
                    new_probabilities: Vec::new(),
                    reference_confidence: e,
                    new_confidence: Vec::new(),
                },
            });
        }
        self.reference_scores.as_ref().expect("filled above").samples.clone()
    }

    /// Reports earlier than the latest promotion or made against an older
    /// reference do not count towards consecutive-drift runs.
    fn recent_reports(&self, reference_id: &str) -> Vec<DriftReport> {
        self.registry
            .reports
            .iter()
            .zip(&self.state.reports)
            .filter(|(r, d)| r.reference_id == reference_id && d.step >= self.state.last_retrain)
            .map(|(r, _)| r.clone())
            .collect()
    }

    fn next_report(&mut self) -> Result<Option<(String, bool)>, MachineError> {
        let size = self.state.policy.window_size;
        let Some(reference_id) = self.state.reference_id.clone() else {
            return Ok(None);
        };
        if self.state.window.len() < size {
            return Ok(None);
        }
        let n = self.registry.reports.len() + 1;
        let window = Dataset::new(self.schema.clone(), self.state.window[..size].to_vec(), format!("window-{n:04}"))?;
        let scores = match self.state.champion.clone() {
            Some(model_id) => {
                let mut s = self.champion_reference_scores(&reference_id, &model_id);
                let model = &self.registry.models[&model_id];
                let (p, e): (Vec<f64>, Vec<f64>) = window.records().iter().map(|r| score(model, r)).unzip();
                s.new_probabilities = p;
                s.new_confidence = e;
                Some(s)
            }
            None => None,
        };
        let now = (self.clock)();
        let report = drift_report(
            &self.registry.references[&reference_id],
            &window,
            scores.as_ref(),
            &self.state.policy.verdict_policy(),
            rng::derive(self.config.seed, n as u64),
            ReportLabels {
                id: format!("drift-{n:04}"),
                reference_id: reference_id.clone(),
                window_id: window.window_label().into(),
                created_at: now.clone(),
            },
        )?;
        let mut recent = self.recent_reports(&reference_id);
        recent.push(report.clone());
        let uncertainty = match (self.champion(), &scores) {
            (Some(ServedModel::Ensemble(_)), Some(s)) => {
                UncertaintySummary::from_samples(&s.reference_confidence, &s.new_confidence)
            }
            _ => None,
        };
        let rolling = self.rolling_metrics();
        let decision = evaluate_triggers(&self.state, &recent, uncertainty.as_ref(), Some(&rolling));
        let id = report.id.clone();
        let retrain = decision.retrain;
        self.commit_at(
            EventKind::DriftReportComputed(Box::new(DriftPayload {
                report,
                consumed: size,
                decision,
            })),
            now,
        )?;
        Ok(Some((id, retrain)))
    }

    pub fn designate_reference(&mut self, source: ReferenceSource) -> Result<String, MachineError> {
        self.reference_records(&source)?;
        let id = format!("ref-{:04}", self.registry.references.len() + 1);
        self.commit(EventKind::ReferenceDesignated(ReferencePayload {
            reference_id: id.clone(),
            source,
        }))?;
        Ok(id)
    }

    /// Snapshot of what a retrain needs. Fails while challengers are
    /// already under evaluation.
    pub fn prepare_retrain(&self) -> Result<RetrainJob, MachineError> {
        if self.state.status == super::Status::Evaluating {
            return Err(LifecycleError::InvalidStatus {
                event: "retrain_started",
                status: self.state.status,
            }
            .into());
        }
        let mut history = self.history()?;
        history = history.with_label(format!("history@{}", self.state.event_cursor));
        Ok(RetrainJob {
            history,
            families: self.config.families.clone(),
            budget_per_family: self.config.budget_per_family,
            ensemble_size: self.config.ensemble_size,
            seed: rng::derive(rng::derive(self.config.seed, 0x5245_5452), self.state.event_cursor),
            step: self.state.t,
        })
    }

    /// Logs the result of a [`RetrainJob`] and returns the challenger ids.
    pub fn finish_retrain(&mut self, outcome: Result<RetrainPayload, String>) -> Result<Vec<String>, MachineError> {
        match outcome {
            Ok(payload) => {
                let ids = payload.candidates.iter().map(|c| c.version_id().into()).collect();
                self.commit(EventKind::RetrainStarted(Box::new(payload)))?;
                Ok(ids)
            }
            Err(reason) => {
                self.commit(EventKind::RetrainFailed(RetrainFailedPayload { reason: reason.clone() }))?;
                Err(MachineError::RetrainFailed(reason))
            }
        }
    }

    pub fn start_retrain(&mut self) -> Result<Vec<String>, MachineError> {
        let job = self.prepare_retrain()?;
        let outcome = job.run();
        self.finish_retrain(outcome)
    }

    /// Shadow-window comparison of `candidate_id` against the champion on
    /// champion-served requests that carry both a candidate score and an
    /// outcome label. `None` when no champion is deployed.
    pub fn promotion_evidence(&self, candidate_id: &str) -> Option<PromotionEvidence> {
        let champion = self.state.champion.as_ref()?;
        let mut candidate = Vec::new();
        let mut served = Vec::new();
        let mut labels = Vec::new();
        for log in self.state.predictions.values() {
            if &log.model_version != champion {
                continue;
            }
            if let (Some(label), Some(&p)) = (log.label, log.shadows.get(candidate_id)) {
                candidate.push(p);
                served.push(log.probability);
                labels.push(label);
            }
        }
        Some(PromotionEvidence {
            candidate_id: candidate_id.into(),
            champion_id: champion.clone(),
            candidate_auc: math::auc(&candidate, &labels),
            champion_auc: math::auc(&served, &labels),
            n_records: labels.len(),
            min_outcomes: self.state.policy.min_outcomes,
        })
    }

    pub fn promote(&mut self, candidate_id: &str) -> Result<PromotedPayload, MachineError> {
        if self.state.status != super::Status::Evaluating {
            return Err(LifecycleError::InvalidStatus {
                event: "promoted",
                status: self.state.status,
            }
            .into());
        }
        if !self.state.challengers.iter().any(|c| c == candidate_id) {
            return Err(LifecycleError::NotChallenger(candidate_id.into()).into());
        }
        let evidence = self.promotion_evidence(candidate_id);
        if let Some(e) = &evidence {
            if !e.is_strict_improvement() {
                return Err(MachineError::PromotionRejected(e.clone()));
            }
        }
        let payload = PromotedPayload {
            version_id: candidate_id.into(),
            previous: self.state.champion.clone(),
            evidence,
        };
        self.commit(EventKind::Promoted(payload.clone()))?;
        Ok(payload)
    }

    /// First deployment: retrain on the history and promote the candidate
    /// of the family the selection chose.
    pub fn deploy_initial(&mut self) -> Result<String, MachineError> {
        if self.state.champion.is_some() {
            return Err(LifecycleError::InvalidStatus {
                event: "promoted",
                status: self.state.status,
            }
            .into());
        }
        self.start_retrain()?;
        let chosen = self.registry.selections.last().expect("retrain logged a selection").chosen_family;
        let id = self
            .state
            .challengers
            .iter()
            .find(|c| self.registry.models[*c].family() == chosen)
            .or(self.state.challengers.first())
            .cloned()
            .expect("retrain registers at least one challenger");
        self.promote(&id)?;
        Ok(id)
    }

    pub fn dismiss_challengers(&mut self) -> Result<Vec<String>, MachineError> {
        let ids = self.state.challengers.clone();
        self.commit(EventKind::ChallengersDismissed(DismissedPayload { ids: ids.clone() }))?;
        Ok(ids)
    }

    /// Reserves an id for an experiment that will be recorded later.
    pub fn allocate_experiment_id(&mut self) -> String {
        self.experiment_counter += 1;
        format!("exp-{:04}", self.experiment_counter)
    }

    pub fn record_experiment(&mut self, mut report: ExperimentReport) -> Result<String, MachineError> {
        if report.id.is_empty() {
            report.id = self.allocate_experiment_id();
        }
        let id = report.id.clone();
        self.commit(EventKind::ExperimentRecorded(Box::new(report)))?;
        Ok(id)
    }
}
