//! The event-sourced lifecycle of a deployed prognosis model.
//!
//! [`LifecycleState`] holds the current step `t`, the last retrain step
//! `T`, the champion, the shadow challengers, the retrain policy and the
//! monitoring buffers. It changes only by applying [`Event`]s in index
//! order, so replaying a log reproduces it exactly. [`Machine`] pairs the
//! state with the artifacts the events carry and turns requests into new
//! events.

mod experiment;
mod machine;
mod triggers;

pub use experiment::{
    temporal_experiment, ExperimentCell, ExperimentError, ExperimentReport, ExperimentRequest, ModelDescriptor,
    PatientComparison,
};
pub use machine::{
    history_split, shadow_score, IngestSummary, Machine, MachineConfig, MachineError, PredictionResponse, Registry,
    RejectedRow, RetrainJob, ShadowOutcome, WindowProgress,
};
pub use triggers::{evaluate_triggers, RollingMetrics, TriggerDecision, TriggerReason, UncertaintySummary};

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::{evaluable_label, Outcome, PatientRecord, StatsSummary};
use crate::drift::{DriftReport, Verdict, VerdictPolicy};
use crate::model::{Prediction, ServedModel};
use crate::tuner::SelectionReport;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetrainPolicy {
    pub alpha: f64,
    /// `K`: consecutive drift verdicts needed to trigger.
    pub consecutive_windows: usize,
    pub detection_threshold: f64,
    /// `rho`: current median epistemic uncertainty over reference median.
    pub uncertainty_ratio: f64,
    pub performance_floor: f64,
    /// Ingested records per monitoring window.
    pub window_size: usize,
    /// Outcomes needed before the performance trigger and promotion
    /// evidence count.
    pub min_outcomes: usize,
    /// Warn level is `alpha * warn_ratio`.
    pub warn_ratio: f64,
}

impl Default for RetrainPolicy {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            consecutive_windows: 2,
            detection_threshold: 0.2,
            uncertainty_ratio: 1.2,
            performance_floor: 0.65,
            window_size: 200,
            min_outcomes: 100,
            warn_ratio: 0.1,
        }
    }
}

impl RetrainPolicy {
    pub fn verdict_policy(&self) -> VerdictPolicy {
        VerdictPolicy {
            alpha: self.alpha,
            detection_threshold: self.detection_threshold,
            warn_ratio: self.warn_ratio,
        }
    }

    pub fn validate(&self) -> Result<(), LifecycleError> {
        let bad = |what: &str| Err(LifecycleError::InvalidPolicy(what.into()));
        if self.verdict_policy().validate().is_err() {
            return bad("alpha in [0, 1), detection_threshold and warn_ratio in [0, 1]");
        }
        if self.consecutive_windows == 0 {
            return bad("consecutive_windows >= 1");
        }
        if !(self.uncertainty_ratio >= 1.0) || !self.uncertainty_ratio.is_finite() {
            return bad("uncertainty_ratio >= 1");
        }
        if !(0.0..=1.0).contains(&self.performance_floor) {
            return bad("performance_floor in [0, 1]");
        }
        if self.window_size < 10 {
            return bad("window_size >= 10");
        }
        if self.min_outcomes == 0 {
            return bad("min_outcomes >= 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Serving,
    RetrainPending,
    Evaluating,
}

/// What happened to one served prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionLog {
    pub step: u64,
    pub patient_id: String,
    pub model_version: String,
    pub probability: f64,
    pub epistemic: f64,
    /// Challenger version id to its shadow probability.
    pub shadows: BTreeMap<String, f64>,
    pub outcome: Option<Outcome>,
    /// Five-year label, when the outcome makes one derivable.
    pub label: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDigest {
    pub id: String,
    pub step: u64,
    pub verdict: Verdict,
    pub detection_score: f64,
    pub retrain: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifecycleState {
    pub t: u64,
    /// Step of the last promotion.
    #[serde(rename = "T")]
    pub last_retrain: u64,
    pub champion: Option<String>,
    pub challengers: Vec<String>,
    pub reference_id: Option<String>,
    pub policy: RetrainPolicy,
    pub status: Status,
    pub event_cursor: u64,
    /// Ingested records not yet part of a drift report.
    pub window: Vec<PatientRecord>,
    /// Keyed by request id.
    pub predictions: BTreeMap<String, PredictionLog>,
    /// Request ids in the order their outcomes arrived.
    pub outcome_order: Vec<String>,
    pub reports: Vec<ReportDigest>,
    pub datasets: Vec<String>,
    pub experiments: Vec<String>,
    pub retrains_started: u64,
    pub reproducibility_violations: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub index: u64,
    /// `t` when the event was emitted.
    pub step: u64,
    pub recorded_at: String,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum EventKind {
    PredictRequested(PredictPayload),
    OutcomePosted(OutcomePayload),
    BatchIngested(BatchPayload),
    ReferenceDesignated(ReferencePayload),
    DriftReportComputed(alloc::boxed::Box<DriftPayload>),
    RetrainStarted(alloc::boxed::Box<RetrainPayload>),
    RetrainFailed(RetrainFailedPayload),
    Promoted(PromotedPayload),
    ChallengersDismissed(DismissedPayload),
    ExperimentRecorded(alloc::boxed::Box<ExperimentReport>),
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::PredictRequested(_) => "predict_requested",
            EventKind::OutcomePosted(_) => "outcome_posted",
            EventKind::BatchIngested(_) => "batch_ingested",
            EventKind::ReferenceDesignated(_) => "reference_designated",
            EventKind::DriftReportComputed(_) => "drift_report_computed",
            EventKind::RetrainStarted(_) => "retrain_started",
            EventKind::RetrainFailed(_) => "retrain_failed",
            EventKind::Promoted(_) => "promoted",
            EventKind::ChallengersDismissed(_) => "challengers_dismissed",
            EventKind::ExperimentRecorded(_) => "experiment_recorded",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictPayload {
    pub request_id: String,
    pub record: PatientRecord,
    /// Exactly what the caller received.
    pub prediction: Prediction,
    /// Challenger version id to its shadow score; never sent to callers.
    pub shadows: BTreeMap<String, ShadowOutcome>,
    /// False when re-scoring the champion did not reproduce the served
    /// probability bit for bit.
    pub reproducible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomePayload {
    pub request_id: String,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchPayload {
    pub dataset_id: String,
    pub records: Vec<PatientRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum ReferenceSource {
    /// A batch already in the log.
    Logged { dataset_id: String },
    Inline { records: Vec<PatientRecord> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferencePayload {
    pub reference_id: String,
    #[serde(flatten)]
    pub source: ReferenceSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftPayload {
    pub report: DriftReport,
    /// Buffered records the report consumed, from the front.
    pub consumed: usize,
    pub decision: TriggerDecision,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrainPayload {
    pub candidates: Vec<ServedModel>,
    pub selection: SelectionReport,
    pub training_records: usize,
    /// Training-data statistics, the occlusion baseline of every candidate.
    pub training_stats: StatsSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrainFailedPayload {
    pub reason: String,
}

/// Shadow-window comparison behind a promotion decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromotionEvidence {
    pub candidate_id: String,
    pub champion_id: String,
    pub candidate_auc: Option<f64>,
    pub champion_auc: Option<f64>,
    /// Shadow-scored records with a usable outcome label.
    pub n_records: usize,
    pub min_outcomes: usize,
}

impl PromotionEvidence {
    pub fn is_strict_improvement(&self) -> bool {
        self.n_records >= self.min_outcomes
            && matches!((self.candidate_auc, self.champion_auc), (Some(c), Some(h)) if c > h)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromotedPayload {
    pub version_id: String,
    pub previous: Option<String>,
    /// `None` only for the first deployment, when no champion exists.
    pub evidence: Option<PromotionEvidence>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DismissedPayload {
    pub ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LifecycleError {
    #[error("event index {got} does not follow cursor {cursor}")]
    OutOfOrder { cursor: u64, got: u64 },
    #[error("event step {got} does not match t = {t}")]
    StepMismatch { t: u64, got: u64 },
    #[error("{event} is not allowed while {status:?}")]
    InvalidStatus { event: &'static str, status: Status },
    #[error("no champion is deployed")]
    NoChampion,
    #[error("prediction served by {served} but the champion is {champion}")]
    NotChampion { served: String, champion: String },
    #[error("request {0} is already logged")]
    DuplicateRequest(String),
    #[error("unknown request id {0}")]
    UnknownRequest(String),
    #[error("request {0} already has an outcome")]
    DuplicateOutcome(String),
    #[error("{0} is not a challenger")]
    NotChallenger(String),
    #[error("promotion of {candidate} lacks a strict shadow-AUC improvement: {evidence:?}")]
    InsufficientEvidence {
        candidate: String,
        evidence: Option<PromotionEvidence>,
    },
    #[error("the promotion names {stated:?} as previous champion but it is {actual:?}")]
    StalePrevious { stated: Option<String>, actual: Option<String> },
    #[error("no reference dataset has been designated")]
    NoReference,
    #[error("unknown dataset id {0}")]
    UnknownDataset(String),
    #[error("duplicate id {0}")]
    DuplicateId(String),
    #[error("drift report consumed {consumed} records but only {buffered} are buffered")]
    WindowUnderflow { consumed: usize, buffered: usize },
    #[error("retraining produced no candidates")]
    NoCandidates,
    #[error("invalid retrain policy: {0}")]
    InvalidPolicy(String),
}

impl LifecycleState {
    pub fn new(policy: RetrainPolicy) -> Self {
        Self {
            t: 0,
            last_retrain: 0,
            champion: None,
            challengers: Vec::new(),
            reference_id: None,
            policy,
            status: Status::Serving,
            event_cursor: 0,
            window: Vec::new(),
            predictions: BTreeMap::new(),
            outcome_order: Vec::new(),
            reports: Vec::new(),
            datasets: Vec::new(),
            experiments: Vec::new(),
            retrains_started: 0,
            reproducibility_violations: 0,
        }
    }

    /// Checks `event` against the state, then applies it. On error the
    /// state is untouched.
    pub fn apply(&mut self, event: &Event) -> Result<(), LifecycleError> {
        if event.index != self.event_cursor + 1 {
            return Err(LifecycleError::OutOfOrder {
                cursor: self.event_cursor,
                got: event.index,
            });
        }
        if event.step != self.t {
            return Err(LifecycleError::StepMismatch {
                t: self.t,
                got: event.step,
            });
        }
        self.check(&event.kind)?;
        self.transition(&event.kind);
        self.event_cursor = event.index;
        Ok(())
    }

    fn known_model(&self, id: &str) -> bool {
        self.champion.as_deref() == Some(id) || self.challengers.iter().any(|c| c == id)
    }

    fn check(&self, kind: &EventKind) -> Result<(), LifecycleError> {
        let status_err = |event| Err(LifecycleError::InvalidStatus {
            event,
            status: self.status,
        });
        match kind {
            EventKind::PredictRequested(p) => {
                let champion = self.champion.as_ref().ok_or(LifecycleError::NoChampion)?;
                if &p.prediction.model_version != champion {
                    return Err(LifecycleError::NotChampion {
                        served: p.prediction.model_version.clone(),
                        champion: champion.clone(),
                    });
                }
                if self.predictions.contains_key(&p.request_id) {
                    return Err(LifecycleError::DuplicateRequest(p.request_id.clone()));
                }
            }
            EventKind::OutcomePosted(o) => match self.predictions.get(&o.request_id) {
                None => return Err(LifecycleError::UnknownRequest(o.request_id.clone())),
                Some(log) if log.outcome.is_some() => {
                    return Err(LifecycleError::DuplicateOutcome(o.request_id.clone()))
                }
                Some(_) => {}
            },
            EventKind::BatchIngested(b) => {
                if self.datasets.contains(&b.dataset_id) {
                    return Err(LifecycleError::DuplicateId(b.dataset_id.clone()));
                }
            }
            EventKind::ReferenceDesignated(r) => {
                if let ReferenceSource::Logged { dataset_id } = &r.source {
                    if !self.datasets.contains(dataset_id) {
                        return Err(LifecycleError::UnknownDataset(dataset_id.clone()));
                    }
                }
            }
            EventKind::DriftReportComputed(d) => {
                if self.reference_id.is_none() {
                    return Err(LifecycleError::NoReference);
                }
                if d.consumed > self.window.len() {
                    return Err(LifecycleError::WindowUnderflow {
                        consumed: d.consumed,
                        buffered: self.window.len(),
                    });
                }
                if self.reports.iter().any(|r| r.id == d.report.id) {
                    return Err(LifecycleError::DuplicateId(d.report.id.clone()));
                }
            }
            EventKind::RetrainStarted(r) => {
                if self.status == Status::Evaluating {
                    return status_err("retrain_started");
                }
                if r.candidates.is_empty() {
                    return Err(LifecycleError::NoCandidates);
                }
                for c in &r.candidates {
                    let id = crate::model::Scorer::version_id(c);
                    if self.known_model(id) {
                        return Err(LifecycleError::DuplicateId(id.into()));
                    }
                }
            }
            EventKind::RetrainFailed(_) => {
                if self.status == Status::Evaluating {
                    return status_err("retrain_failed");
                }
            }
            EventKind::Promoted(p) => {
                if self.status != Status::Evaluating {
                    return status_err("promoted");
                }
                if !self.challengers.contains(&p.version_id) {
                    return Err(LifecycleError::NotChallenger(p.version_id.clone()));
                }
                if p.previous != self.champion {
                    return Err(LifecycleError::StalePrevious {
                        stated: p.previous.clone(),
                        actual: self.champion.clone(),
                    });
                }
                if self.champion.is_some() {
                    let ok = p.evidence.as_ref().is_some_and(|e| {
                        e.is_strict_improvement()
                            && e.candidate_id == p.version_id
                            && Some(&e.champion_id) == self.champion.as_ref()
                    });
                    if !ok {
                        return Err(LifecycleError::InsufficientEvidence {
                            candidate: p.version_id.clone(),
                            evidence: p.evidence.clone(),
                        });
                    }
                }
            }
            EventKind::ChallengersDismissed(_) => {
                if self.status != Status::Evaluating {
                    return status_err("challengers_dismissed");
                }
            }
            EventKind::ExperimentRecorded(e) => {
                if self.experiments.contains(&e.id) {
                    return Err(LifecycleError::DuplicateId(e.id.clone()));
                }
            }
        }
        Ok(())
    }

    fn transition(&mut self, kind: &EventKind) {
        match kind {
            EventKind::PredictRequested(p) => {
                self.predictions.insert(
                    p.request_id.clone(),
                    PredictionLog {
                        step: self.t,
                        patient_id: p.record.patient_id.clone(),
                        model_version: p.prediction.model_version.clone(),
                        probability: p.prediction.survival_probability,
                        epistemic: p.prediction.uncertainty.epistemic,
                        shadows: p
                            .shadows
                            .iter()
                            .filter_map(|(id, s)| match s {
                                ShadowOutcome::Scored { probability, .. } => Some((id.clone(), *probability)),
                                ShadowOutcome::Failed { .. } => None,
                            })
                            .collect(),
                        outcome: None,
                        label: None,
                    },
                );
                if !p.reproducible {
                    self.reproducibility_violations += 1;
                }
                self.t += 1;
            }
            EventKind::OutcomePosted(o) => {
                let log = self.predictions.get_mut(&o.request_id).expect("checked");
                let mut outcome = o.outcome.clone();
                outcome.recorded_at_step = self.t;
                let probe = PatientRecord {
                    patient_id: String::new(),
                    diagnosis_year: 0,
                    features: BTreeMap::new(),
                    outcome: Some(outcome.clone()),
                };
                log.label = evaluable_label(&probe);
                log.outcome = Some(outcome);
                self.outcome_order.push(o.request_id.clone());
            }
            EventKind::BatchIngested(b) => {
                self.datasets.push(b.dataset_id.clone());
                self.window.extend(b.records.iter().cloned());
            }
            EventKind::ReferenceDesignated(r) => {
                self.reference_id = Some(r.reference_id.clone());
                self.window.clear();
            }
            EventKind::DriftReportComputed(d) => {
                self.window.drain(..d.consumed);
                self.reports.push(ReportDigest {
                    id: d.report.id.clone(),
                    step: self.t,
                    verdict: d.report.verdict,
                    detection_score: d.report.detection.score,
                    retrain: d.decision.retrain,
                });
                if d.decision.retrain && self.status == Status::Serving {
                    self.status = Status::RetrainPending;
                }
            }
            EventKind::RetrainStarted(r) => {
                self.challengers = r
                    .candidates
                    .iter()
                    .map(|c| String::from(crate::model::Scorer::version_id(c)))
                    .collect();
                self.status = Status::Evaluating;
                self.retrains_started += 1;
            }
            EventKind::RetrainFailed(_) => self.status = Status::Serving,
            EventKind::Promoted(p) => {
                self.champion = Some(p.version_id.clone());
                self.last_retrain = self.t;
                self.challengers.clear();
                self.status = Status::Serving;
            }
            EventKind::ChallengersDismissed(_) => {
                self.challengers.clear();
                self.status = Status::Serving;
            }
            EventKind::ExperimentRecorded(e) => self.experiments.push(e.id.clone()),
        }
    }

    /// Structural invariants that must hold after every event.
    pub fn check_invariants(&self) -> Result<(), String> {
        if self.last_retrain > self.t {
            return Err(format!("T = {} exceeds t = {}", self.last_retrain, self.t));
        }
        if self.status == Status::Evaluating && self.challengers.is_empty() {
            return Err("evaluating without challengers".into());
        }
        if self.status != Status::Evaluating && !self.challengers.is_empty() {
            return Err("challengers outside evaluation".into());
        }
        if self.predictions.len() as u64 != self.t {
            return Err(format!("{} predictions logged at t = {}", self.predictions.len(), self.t));
        }
        Ok(())
    }
}

/// Pure form of [`LifecycleState::apply`].
pub fn apply_event(state: &LifecycleState, event: &Event) -> Result<LifecycleState, LifecycleError> {
    let mut next = state.clone();
    next.apply(event)?;
    Ok(next)
}

/// Applies a whole log to a fresh state.
pub fn replay<'a>(policy: RetrainPolicy, events: impl IntoIterator<Item = &'a Event>) -> Result<LifecycleState, LifecycleError> {
    let mut s = LifecycleState::new(policy);
    for e in events {
        s.apply(e)?;
    }
    Ok(s)
}
