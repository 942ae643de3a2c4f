use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::LifecycleState;
use crate::drift::{DriftReport, Verdict, VerdictReason};
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriggerReason {
    FeatureDrift,
    DetectionScore,
    OutputDrift,
    UncertaintyWidening,
    PerformanceDrop,
}

impl TriggerReason {
    pub fn as_str(self) -> &'static str {
        match self {
            TriggerReason::FeatureDrift => "feature_drift",
            TriggerReason::DetectionScore => "detection_score",
            TriggerReason::OutputDrift => "output_drift",
            TriggerReason::UncertaintyWidening => "uncertainty_widening",
            TriggerReason::PerformanceDrop => "performance_drop",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TriggerDecision {
    pub retrain: bool,
    pub reasons: Vec<TriggerReason>,
    /// The value that satisfied each reason.
    pub evidence: BTreeMap<TriggerReason, f64>,
}

/// Median epistemic spread on the reference and on the current window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UncertaintySummary {
    pub reference_median: f64,
    pub current_median: f64,
}

impl UncertaintySummary {
    pub fn from_samples(reference: &[f64], current: &[f64]) -> Option<Self> {
        if reference.is_empty() || current.is_empty() {
            return None;
        }
        Some(Self {
            reference_median: math::median(reference),
            current_median: math::median(current),
        })
    }

    /// Current over reference median; `None` when the reference median is 0.
    pub fn ratio(&self) -> Option<f64> {
        (self.reference_median > 0.0).then(|| self.current_median / self.reference_median)
    }
}

/// Champion performance over the most recent outcomes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RollingMetrics {
    pub model_version: Option<alloc::string::String>,
    /// Labelled outcomes inside the rolling window.
    pub n_outcomes: usize,
    pub window: usize,
    pub auc: Option<f64>,
    pub observed_survival_rate: Option<f64>,
    pub mean_predicted_survival: Option<f64>,
}

impl RollingMetrics {
    /// Uses the last `policy.window_size` labelled outcomes of predictions
    /// served by the current champion. AUC is reported once
    /// `policy.min_outcomes` of them exist and both classes occur.
    pub fn from_state(state: &LifecycleState) -> Self {
        let window = state.policy.window_size;
        let champion = state.champion.as_deref();
        let mut probabilities = Vec::new();
        let mut labels = Vec::new();
        for id in state.outcome_order.iter().rev() {
            if probabilities.len() == window {
                break;
            }
            let log = &state.predictions[id];
            if Some(log.model_version.as_str()) != champion {
                continue;
            }
            if let Some(label) = log.label {
                probabilities.push(log.probability);
                labels.push(label);
            }
        }
        let n = labels.len();
        let auc = if n >= state.policy.min_outcomes {
            math::auc(&probabilities, &labels)
        } else {
            None
        };
        let (observed, predicted) = if n == 0 {
            (None, None)
        } else {
            (
                Some(labels.iter().filter(|&&l| l).count() as f64 / n as f64),
                Some(math::mean(&probabilities)),
            )
        };
        Self {
            model_version: champion.map(Into::into),
            n_outcomes: n,
            window,
            auc,
            observed_survival_rate: observed,
            mean_predicted_survival: predicted,
        }
    }
}

/// Decides whether to retrain. Fires when any of these holds:
/// the last `K` reports all have verdict drift; the latest detection score
/// exceeds the threshold; the current median epistemic spread is at least
/// `rho` times the reference median; the rolling AUC is below the floor
/// with at least `min_outcomes` outcomes.
///
/// A run of drift verdicts is reported under the report reasons behind the
/// latest verdict: corrected feature flags give `feature_drift`, output
/// drift gives `output_drift`.
pub fn evaluate_triggers(
    state: &LifecycleState,
    reports: &[DriftReport],
    uncertainty: Option<&UncertaintySummary>,
    rolling: Option<&RollingMetrics>,
) -> TriggerDecision {
    let policy = &state.policy;
    let mut evidence = BTreeMap::new();
    let k = policy.consecutive_windows;

    if k > 0 && reports.len() >= k && reports[reports.len() - k..].iter().all(|r| r.verdict == Verdict::Drift) {
        let latest = &reports[reports.len() - 1];
        let run = k as f64;
        let mut mapped = false;
        for reason in &latest.reasons {
            match reason {
                VerdictReason::CorrectedFeatureFlag => {
                    evidence.insert(TriggerReason::FeatureDrift, run);
                    mapped = true;
                }
                VerdictReason::OutputDrift => {
                    evidence.insert(TriggerReason::OutputDrift, run);
                    mapped = true;
                }
                VerdictReason::DetectionScore | VerdictReason::UncorrectedFeatureP => {}
            }
        }
        if !mapped {
            evidence.insert(TriggerReason::FeatureDrift, run);
        }
    }

    if let Some(latest) = reports.last() {
        if latest.detection.score > policy.detection_threshold {
            evidence.insert(TriggerReason::DetectionScore, latest.detection.score);
        }
    }

    if let Some(u) = uncertainty {
        if u.reference_median > 0.0 && u.current_median >= policy.uncertainty_ratio * u.reference_median {
            evidence.insert(TriggerReason::UncertaintyWidening, u.current_median / u.reference_median);
        }
    }

    if let Some(r) = rolling {
        if r.n_outcomes >= policy.min_outcomes {
            if let Some(auc) = r.auc {
                if auc < policy.performance_floor {
                    evidence.insert(TriggerReason::PerformanceDrop, auc);
                }
            }
        }
    }

    TriggerDecision {
        retrain: !evidence.is_empty(),
        reasons: evidence.keys().copied().collect(),
        evidence,
    }
}
