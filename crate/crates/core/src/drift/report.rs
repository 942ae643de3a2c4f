use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{
    boundary_adherence, category_table, chi_square_categorical, ks_two_sample, logistic_detection, output_drift,
    DetectionResult, DriftError, TestResult,
};
use crate::data::{Dataset, FeatureKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    None,
    Warn,
    Drift,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::None => "none",
            Verdict::Warn => "warn",
            Verdict::Drift => "drift",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictReason {
    CorrectedFeatureFlag,
    DetectionScore,
    OutputDrift,
    UncorrectedFeatureP,
}

/// Thresholds that turn the statistics into a verdict. A copy travels
/// with every report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerdictPolicy {
    /// Benjamini-Hochberg level for the per-feature tests, and the level of
    /// the output-drift test.
    pub alpha: f64,
    /// Detection score strictly above this means drift.
    pub detection_threshold: f64,
    /// A single uncorrected p-value below `alpha * warn_ratio` gives warn.
    pub warn_ratio: f64,
}

impl Default for VerdictPolicy {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            detection_threshold: 0.2,
            warn_ratio: 0.1,
        }
    }
}

impl VerdictPolicy {
    pub fn with_alpha(alpha: f64) -> Self {
        Self {
            alpha,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), DriftError> {
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(DriftError::InvalidAlpha(self.alpha));
        }
        if !(0.0..=1.0).contains(&self.detection_threshold) {
            return Err(DriftError::InvalidPolicy(format!(
                "detection_threshold {} outside [0, 1]",
                self.detection_threshold
            )));
        }
        if !(0.0..=1.0).contains(&self.warn_ratio) {
            return Err(DriftError::InvalidPolicy(format!("warn_ratio {} outside [0, 1]", self.warn_ratio)));
        }
        Ok(())
    }

    pub fn warn_level(&self) -> f64 {
        self.alpha * self.warn_ratio
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureDrift {
    pub test: TestResult,
    /// Continuous features only.
    pub boundary_adherence: Option<f64>,
}

/// Model outputs on the reference and window records, when a model is
/// deployed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreSamples {
    pub reference_probabilities: Vec<f64>,
    pub new_probabilities: Vec<f64>,
    /// Per-record uncertainty values (epistemic spread), when available.
    pub reference_confidence: Vec<f64>,
    pub new_confidence: Vec<f64>,
}

/// Identifiers stamped onto a report by the caller.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportLabels {
    pub id: String,
    pub reference_id: String,
    pub window_id: String,
    pub created_at: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub id: String,
    pub reference_id: String,
    pub window_id: String,
    pub created_at: String,
    pub seed: u64,
    pub policy: VerdictPolicy,
    pub features: BTreeMap<String, FeatureDrift>,
    pub detection: DetectionResult,
    pub output_drift: Option<TestResult>,
    pub confidence_drift: Option<TestResult>,
    pub corrected_flags: BTreeMap<String, bool>,
    pub verdict: Verdict,
    pub reasons: Vec<VerdictReason>,
}

impl DriftReport {
    pub fn flagged_features(&self) -> impl Iterator<Item = &str> {
        self.corrected_flags.iter().filter(|(_, &f)| f).map(|(k, _)| k.as_str())
    }
}

/// Benjamini-Hochberg step-up procedure: flags every hypothesis whose rank
/// is at most the largest `k` with `p_(k) <= k alpha / m`.
pub fn benjamini_hochberg(p_values: &[f64], alpha: f64) -> Vec<bool> {
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]));
    let mut cutoff = 0;
    for (rank, &i) in order.iter().enumerate() {
        if p_values[i] <= (rank + 1) as f64 * alpha / m as f64 {
            cutoff = rank + 1;
        }
    }
    let mut flags = alloc::vec![false; m];
    for &i in &order[..cutoff] {
        flags[i] = true;
    }
    if alpha <= 0.0 {
        flags.iter_mut().for_each(|f| *f = false);
    }
    flags
}

/// Compares `window` against `reference`:
/// KS and boundary adherence per continuous feature, chi-square per
/// categorical feature, logistic detection over all features, and KS on
/// model outputs when scores are supplied. Per-feature p-values are
/// corrected with Benjamini-Hochberg at `policy.alpha`.
///
/// The verdict is drift if any corrected flag is set, the detection score
/// exceeds the threshold, or output drift has `p < alpha`; otherwise warn
/// if any uncorrected feature p-value is below `policy.warn_level()`.
pub fn drift_report(
    reference: &Dataset,
    window: &Dataset,
    scores: Option<&ScoreSamples>,
    policy: &VerdictPolicy,
    seed: u64,
    labels: ReportLabels,
) -> Result<DriftReport, DriftError> {
    policy.validate()?;
    if reference.schema() != window.schema() {
        return Err(DriftError::SchemaMismatch);
    }
    if reference.is_empty() {
        return Err(DriftError::EmptySample("reference"));
    }
    if window.is_empty() {
        return Err(DriftError::EmptySample("new"));
    }
    let mut features = BTreeMap::new();
    let mut names = Vec::new();
    let mut p_values = Vec::new();
    for spec in reference.schema().features() {
        let entry = match &spec.kind {
            FeatureKind::Continuous { .. } => {
                let a: Vec<f64> = reference.records().iter().filter_map(|r| r.number(&spec.name)).collect();
                let b: Vec<f64> = window.records().iter().filter_map(|r| r.number(&spec.name)).collect();
                if a.is_empty() || b.is_empty() {
                    // optional feature never observed on one side
                    continue;
                }
                FeatureDrift {
                    test: ks_two_sample(&a, &b)?,
                    boundary_adherence: Some(boundary_adherence(&a, &b)?),
                }
            }
            FeatureKind::Categorical { categories } => {
                let a = category_table(categories, &spec.name, reference.records().iter());
                let b = category_table(categories, &spec.name, window.records().iter());
                if a.values().sum::<usize>() == 0 || b.values().sum::<usize>() == 0 {
                    continue;
                }
                FeatureDrift {
                    test: chi_square_categorical(&a, &b)?,
                    boundary_adherence: None,
                }
            }
        };
        names.push(spec.name.clone());
        p_values.push(entry.test.p_value);
        features.insert(spec.name.clone(), entry);
    }
    let flags = benjamini_hochberg(&p_values, policy.alpha);
    let corrected_flags: BTreeMap<String, bool> = names.iter().cloned().zip(flags.iter().copied()).collect();

    let detection = logistic_detection(reference, window, seed)?;
    let (output, confidence) = match scores {
        Some(s) if !s.reference_probabilities.is_empty() && !s.new_probabilities.is_empty() => {
            let output = output_drift(&s.reference_probabilities, &s.new_probabilities)?;
            let confidence = if s.reference_confidence.is_empty() || s.new_confidence.is_empty() {
                None
            } else {
                Some(output_drift(&s.reference_confidence, &s.new_confidence)?)
            };
            (Some(output), confidence)
        }
        _ => (None, None),
    };

    let mut reasons = Vec::new();
    if flags.iter().any(|&f| f) {
        reasons.push(VerdictReason::CorrectedFeatureFlag);
    }
    if detection.score > policy.detection_threshold {
        reasons.push(VerdictReason::DetectionScore);
    }
    if output.as_ref().is_some_and(|o| o.p_value < policy.alpha) {
        reasons.push(VerdictReason::OutputDrift);
    }
    let verdict = if !reasons.is_empty() {
        Verdict::Drift
    } else if p_values.iter().any(|&p| p < policy.warn_level()) {
        reasons.push(VerdictReason::UncorrectedFeatureP);
        Verdict::Warn
    } else {
        Verdict::None
    };

    Ok(DriftReport {
        id: labels.id,
        reference_id: labels.reference_id,
        window_id: labels.window_id,
        created_at: labels.created_at,
        seed,
        policy: *policy,
        features,
        detection,
        output_drift: output,
        confidence_drift: confidence,
        corrected_flags,
        verdict,
        reasons,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic_cohort, FeatureValue, SyntheticConfig};
    use alloc::vec;
    use proptest::prelude::*;

    fn cohort(seed: u64) -> Dataset {
        let mut cfg = SyntheticConfig::null_drift();
        cfg.years = 1;
        cfg.patients_per_year = 400;
        cfg.seed = seed;
        generate_synthetic_cohort(&cfg).unwrap()
    }

    #[test]
    fn bh_known_case() {
        // m = 4, alpha = 0.05: thresholds .0125 .025 .0375 .05; the step-up
        // rule keeps 0.03 because 0.035 passes at rank 3
        let p = [0.01, 0.035, 0.03, 0.2];
        assert_eq!(benjamini_hochberg(&p, 0.05), vec![true, true, true, false]);
        assert_eq!(benjamini_hochberg(&p, 0.0), vec![false; 4]);
        assert_eq!(benjamini_hochberg(&[0.0], 0.0), vec![false]);
    }

    proptest! {
        #[test]
        fn bh_monotone_in_alpha(p in prop::collection::vec(0.0f64..1.0, 1..12), a in 0.0f64..0.5, b in 0.0f64..0.5) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let f1 = benjamini_hochberg(&p, lo);
            let f2 = benjamini_hochberg(&p, hi);
            prop_assert!(f1.iter().zip(&f2).all(|(x, y)| !x || *y));
        }
    }

    #[test]
    fn self_comparison_is_quiet() {
        let d = cohort(1);
        let r = drift_report(&d, &d, None, &VerdictPolicy::default(), 0, ReportLabels::default()).unwrap();
        assert_eq!(r.verdict, Verdict::None);
        assert_eq!(r.flagged_features().count(), 0);
        assert!(r.features.values().all(|f| f.test.statistic == 0.0));
    }

    #[test]
    fn large_shift_is_drift() {
        let a = cohort(2);
        let shifted: Vec<_> = cohort(3)
            .records()
            .iter()
            .map(|r| {
                let mut r = r.clone();
                let v = r.number("tumour_size").unwrap();
                r.features.insert("tumour_size".into(), FeatureValue::Number((v + 30.0).min(200.0)));
                r
            })
            .collect();
        let b = Dataset::new(a.schema().clone(), shifted, "shifted").unwrap();
        let r = drift_report(&a, &b, None, &VerdictPolicy::default(), 0, ReportLabels::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Drift);
        assert_eq!(r.flagged_features().collect::<Vec<_>>(), vec!["tumour_size"]);
        assert!(r.features["tumour_size"].boundary_adherence.unwrap() < 1.0);
        assert!(r.reasons.contains(&VerdictReason::CorrectedFeatureFlag));
    }

    #[test]
    fn alpha_zero_flags_nothing() {
        let a = cohort(4);
        let b = cohort(5);
        let r = drift_report(&a, &b, None, &VerdictPolicy::with_alpha(0.0), 0, ReportLabels::default()).unwrap();
        assert!(r.corrected_flags.values().all(|f| !f));
        assert!(drift_report(&a, &b, None, &VerdictPolicy::with_alpha(1.0), 0, ReportLabels::default()).is_err());
    }

    #[test]
    fn output_drift_drives_verdict() {
        let a = cohort(6);
        let scores = ScoreSamples {
            reference_probabilities: (0..200).map(|i| i as f64 / 400.0).collect(),
            new_probabilities: (0..200).map(|i| 0.5 + i as f64 / 400.0).collect(),
            ..ScoreSamples::default()
        };
        let r = drift_report(&a, &a, Some(&scores), &VerdictPolicy::default(), 0, ReportLabels::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Drift);
        assert_eq!(r.reasons, vec![VerdictReason::OutputDrift]);
        assert!(r.confidence_drift.is_none());
    }
}
