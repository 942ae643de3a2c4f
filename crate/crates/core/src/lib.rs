//! Allocation-only core of a monitored prognosis-model lifecycle.
//!
//! The crate holds everything that is pure computation: the patient-data
//! schema and synthetic cohort generator, two-sample drift statistics,
//! the prognosis models with their uncertainty and attribution outputs,
//! hyperparameter search, and the event-sourced lifecycle state machine
//! that decides when a deployed model must be retrained.
//!
//! Nothing here touches the filesystem, the network or a clock. The `lm`
//! crate layers CSV ingestion, the persisted event log, the HTTP service
//! and the command-line tool on top.

#![no_std]
#![forbid(unsafe_code)]
// negated float comparisons are how NaN inputs get rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::result_large_err)]

extern crate alloc;

#[cfg(any(test, feature = "std"))]
extern crate std;

pub mod data;
pub mod drift;
pub mod lifecycle;
pub mod math;
pub mod model;
pub mod rng;
pub mod space;
pub mod tuner;

pub use data::{
    Dataset, FeatureKind, FeatureSchema, FeatureSpec, FeatureValue, Outcome, PatientRecord,
    StatsSummary, SyntheticConfig, VitalStatus,
};
pub use drift::{DetectionResult, DriftReport, TestResult, Verdict};
pub use lifecycle::{Event, EventKind, LifecycleState, RetrainPolicy, TriggerDecision};
pub use model::{EnsembleArtifact, Family, Metrics, ModelArtifact, Prediction, ServedModel};
pub use space::{Hyperparams, SearchSpace};
pub use tuner::{SelectionReport, TunerResult};
