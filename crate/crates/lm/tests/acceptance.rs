//! End-to-end acceptance checks. Prints one PASS or FAIL line per
//! criterion and exits nonzero if any fails. Pass criterion numbers as
//! arguments to run a subset.

mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use lm::config::load_synthetic;
use lm::store::Store;
use lm_core::data::{
    descriptive_stats, generate_synthetic_cohort, window, FeatureSchema, FeatureSpec, FeatureValue, Outcome,
    PatientRecord, SyntheticConfig, VitalStatus, YearRange,
};
use lm_core::drift::{drift_report, ks_two_sample, logistic_detection, ReportLabels, Verdict, VerdictPolicy};
use lm_core::lifecycle::{
    evaluate_triggers, replay, temporal_experiment, EventKind, ExperimentRequest, LifecycleError, LifecycleState,
    Machine, MachineConfig, MachineError, ReferenceSource, RetrainPolicy, Status, TriggerReason,
    UncertaintySummary,
};
use lm_core::model::encode::Design;
use lm_core::model::{evaluate, logistic, predict, EnsembleArtifact, Family, Scorer};
use lm_core::space::{Dimension, HyperValue, Hyperparams, Scale, SearchSpace};
use lm_core::tuner::{bayes_opt, random_search};
use lm_core::Dataset;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use serde_json::Value;

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {{
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($fmt)+));
        }
    }};
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

// ---------------------------------------------------------------- drift

fn ecdf_sup(a: &[f64], b: &[f64]) -> f64 {
    let ecdf = |s: &[f64], x: f64| s.iter().filter(|&&v| v <= x).count() as f64 / s.len() as f64;
    a.iter().chain(b).map(|&x| (ecdf(a, x) - ecdf(b, x)).abs()).fold(0.0, f64::max)
}

fn draw(r: &mut StdRng, tied: bool) -> f64 {
    if tied {
        r.random_range(0..6) as f64
    } else {
        r.random::<f64>() * 10.0 - 5.0
    }
}

fn ks_oracle() -> Check {
    let mut r = StdRng::seed_from_u64(1);
    for case in 0..1000 {
        // every third instance comes from a six-value grid so ties occur
        let tied = case % 3 == 0;
        let n = r.random_range(1..=50);
        let m = r.random_range(1..=50);
        let a: Vec<f64> = (0..n).map(|_| draw(&mut r, tied)).collect();
        let b: Vec<f64> = (0..m).map(|_| draw(&mut r, tied)).collect();
        let got = ks_two_sample(&a, &b).map_err(err)?.statistic;
        let want = ecdf_sup(&a, &b);
        ensure!(got == want, "instance {case} (n {n}, m {m}): statistic {got}, brute force {want}");
    }
    Ok("1000 instances equal the brute-force sup-difference".into())
}

fn gaussian_schema(features: usize) -> FeatureSchema {
    FeatureSchema::new((1..=features).map(|i| FeatureSpec::continuous(&format!("x{i}"), "", -100.0, 100.0)).collect())
        .unwrap()
}

fn gaussian_rows(features: usize, n: usize, r: &mut StdRng) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..features).map(|_| r.sample(StandardNormal)).collect()).collect()
}

fn to_dataset(schema: &FeatureSchema, rows: &[Vec<f64>], label: &str) -> Dataset {
    let records = rows
        .iter()
        .enumerate()
        .map(|(i, row)| PatientRecord {
            patient_id: format!("{label}-{i}"),
            diagnosis_year: 2000,
            features: schema
                .names()
                .zip(row)
                .map(|(name, &v)| (name.to_string(), FeatureValue::Number(v)))
                .collect(),
            outcome: None,
        })
        .collect();
    Dataset::new(schema.clone(), records, label).unwrap()
}

fn labels(seed: u64) -> ReportLabels {
    ReportLabels {
        id: format!("report-{seed}"),
        reference_id: "reference".into(),
        window_id: "window".into(),
        created_at: String::new(),
    }
}

const SIDE: usize = 500;
const FEATURES: usize = 6;

fn null_calibration() -> Check {
    let schema = gaussian_schema(FEATURES);
    let (mut flagged, mut none) = (0usize, 0usize);
    for seed in 0..50u64 {
        let mut r = StdRng::seed_from_u64(10_000 + seed);
        let a = to_dataset(&schema, &gaussian_rows(FEATURES, SIDE, &mut r), "reference");
        let b = to_dataset(&schema, &gaussian_rows(FEATURES, SIDE, &mut r), "window");
        let report = drift_report(&a, &b, None, &VerdictPolicy::with_alpha(0.05), seed, labels(seed)).map_err(err)?;
        flagged += report.corrected_flags.values().filter(|&&f| f).count();
        if report.verdict == Verdict::None {
            none += 1;
        }
    }
    let fraction = flagged as f64 / (50 * FEATURES) as f64;
    ensure!(fraction <= 0.08, "mean flagged fraction {fraction:.4} > 0.08");
    ensure!(none >= 45, "verdict none in {none}/50 seeds");
    Ok(format!("flagged fraction {fraction:.4}, verdict none in {none}/50"))
}

fn drift_power() -> Check {
    let schema = gaussian_schema(FEATURES);
    let (mut hits, mut false_flags) = (0usize, 0usize);
    for seed in 0..50u64 {
        let mut r = StdRng::seed_from_u64(20_000 + seed);
        let shifted = seed as usize % FEATURES;
        let a_rows = gaussian_rows(FEATURES, SIDE, &mut r);
        let mut b_rows = gaussian_rows(FEATURES, SIDE, &mut r);
        let column: Vec<f64> = a_rows.iter().chain(&b_rows).map(|row| row[shifted]).collect();
        let mean = column.iter().sum::<f64>() / column.len() as f64;
        let pooled = (column.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (column.len() - 1) as f64).sqrt();
        for row in &mut b_rows {
            row[shifted] += 0.5 * pooled;
        }
        let a = to_dataset(&schema, &a_rows, "reference");
        let b = to_dataset(&schema, &b_rows, "window");
        let report = drift_report(&a, &b, None, &VerdictPolicy::with_alpha(0.05), seed, labels(seed)).map_err(err)?;
        for (name, &flag) in &report.corrected_flags {
            if *name == format!("x{}", shifted + 1) {
                hits += flag as usize;
            } else {
                false_flags += flag as usize;
            }
        }
    }
    let others = false_flags as f64 / (50 * (FEATURES - 1)) as f64;
    ensure!(hits >= 45, "shifted feature flagged in {hits}/50 seeds");
    ensure!(others <= 0.08, "other features flagged at rate {others:.4}");
    Ok(format!("shifted feature flagged {hits}/50, others {others:.4}"))
}

fn detection_calibration() -> Check {
    let schema = gaussian_schema(FEATURES);
    let mut aucs = Vec::new();
    for seed in 0..20u64 {
        let mut r = StdRng::seed_from_u64(30_000 + seed);
        let a = to_dataset(&schema, &gaussian_rows(FEATURES, SIDE, &mut r), "reference");
        let b = to_dataset(&schema, &gaussian_rows(FEATURES, SIDE, &mut r), "window");
        aucs.push(logistic_detection(&a, &b, seed).map_err(err)?.auc);
    }
    let mean = aucs.iter().sum::<f64>() / aucs.len() as f64;
    ensure!((0.45..=0.55).contains(&mean), "same-law mean AUC {mean:.4}");

    let mut worst: f64 = 1.0;
    for seed in 0..5u64 {
        let mut r = StdRng::seed_from_u64(31_000 + seed);
        let mut a_rows = gaussian_rows(FEATURES, SIDE, &mut r);
        let mut b_rows = gaussian_rows(FEATURES, SIDE, &mut r);
        // x1 lies in [0, 1] for the reference and [2, 3] for the window
        for row in &mut a_rows {
            row[0] = r.random::<f64>();
        }
        for row in &mut b_rows {
            row[0] = 2.0 + r.random::<f64>();
        }
        let a = to_dataset(&schema, &a_rows, "reference");
        let b = to_dataset(&schema, &b_rows, "window");
        worst = worst.min(logistic_detection(&a, &b, seed).map_err(err)?.auc);
    }
    ensure!(worst >= 0.95, "separated feature AUC {worst:.4}");
    Ok(format!("same-law mean AUC {mean:.4}, separated minimum {worst:.4}"))
}

// ---------------------------------------------------------------- models

fn regularised_loss(rows: &[Vec<f64>], y: &[f64], w: &[f64], b: f64, l2: f64) -> f64 {
    let n = rows.len() as f64;
    let data: f64 = rows
        .iter()
        .zip(y)
        .map(|(x, &y)| {
            let z = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() + b;
            z.exp().ln_1p() - y * z
        })
        .sum();
    data / n + l2 * w.iter().map(|v| v * v).sum::<f64>() / (2.0 * n)
}

fn gradient_check() -> Check {
    const H: f64 = 1e-5;
    let mut r = StdRng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let n = r.random_range(5..=40);
        let d = r.random_range(1..=6);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| r.sample::<f64, _>(StandardNormal) * 2.0).collect()).collect();
        let y: Vec<f64> = (0..n).map(|_| r.random_bool(0.5) as u8 as f64).collect();
        let w: Vec<f64> = (0..d).map(|_| r.sample(StandardNormal)).collect();
        let b: f64 = r.sample(StandardNormal);
        let l2 = r.random_range(0.0..10.0);
        let (_, grad, grad_b) = logistic::objective_and_gradient(&Design::from_rows(&rows), &y, &w, b, l2);
        for j in 0..d {
            let (mut up, mut down) = (w.clone(), w.clone());
            up[j] += H;
            down[j] -= H;
            let numeric = (regularised_loss(&rows, &y, &up, b, l2) - regularised_loss(&rows, &y, &down, b, l2)) / (2.0 * H);
            worst = worst.max((numeric - grad[j]).abs());
        }
        let numeric = (regularised_loss(&rows, &y, &w, b + H, l2) - regularised_loss(&rows, &y, &w, b - H, l2)) / (2.0 * H);
        worst = worst.max((numeric - grad_b).abs());
    }
    ensure!(worst <= 1e-5, "max abs gradient error {worst:e}");
    Ok(format!("max abs error {worst:.2e} over 50 instances"))
}

/// Serves fixed scores by patient id, so evaluation can be checked against
/// arbitrary score vectors with ties.
struct Table {
    schema: FeatureSchema,
    scores: BTreeMap<String, f64>,
}

impl Scorer for Table {
    fn version_id(&self) -> &str {
        "table"
    }

    fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    fn member_probabilities(&self, record: &PatientRecord) -> Vec<f64> {
        vec![self.scores[&record.patient_id]]
    }
}

fn auc_oracle() -> Check {
    let schema = gaussian_schema(1);
    let mut r = StdRng::seed_from_u64(6);
    for case in 0..200 {
        let n = r.random_range(10..=80);
        let tied = case % 2 == 0;
        let mut rows = Vec::new();
        let mut outcomes = Vec::new();
        let mut scores = Vec::new();
        for _ in 0..n {
            rows.push(vec![r.sample(StandardNormal)]);
            // survived, died, or censored before five years (no label)
            let kind = r.random_range(0..10);
            outcomes.push(match kind {
                0..=4 => (80, VitalStatus::AliveOrCensored),
                5..=8 => (20, VitalStatus::DiedOfDisease),
                _ => (30, VitalStatus::AliveOrCensored),
            });
            scores.push(if tied { r.random_range(1..10) as f64 / 10.0 } else { r.random_range(0.01..0.99) });
        }
        let mut data = to_dataset(&schema, &rows, "auc");
        let records: Vec<PatientRecord> = data
            .records()
            .iter()
            .zip(&outcomes)
            .map(|(rec, &(months, event))| PatientRecord {
                outcome: Some(Outcome {
                    survival_months: months,
                    event,
                    decision: String::new(),
                    recorded_at_step: 0,
                }),
                ..rec.clone()
            })
            .collect();
        data = Dataset::new(schema.clone(), records, "auc").unwrap();
        let table = Table {
            schema: schema.clone(),
            scores: data.records().iter().zip(&scores).map(|(rec, &s)| (rec.patient_id.clone(), s)).collect(),
        };
        let (mut kept, mut labels) = (Vec::new(), Vec::new());
        for (&(months, event), &s) in outcomes.iter().zip(&scores) {
            let label = if months >= 60 {
                Some(true)
            } else if event == VitalStatus::DiedOfDisease {
                Some(false)
            } else {
                None
            };
            if let Some(l) = label {
                kept.push(s);
                labels.push(l);
            }
        }
        let Some(want) = common::pairwise_auc(&kept, &labels) else {
            continue;
        };
        let got = evaluate(&table, &data).map_err(err)?.auc;
        ensure!(got == want, "instance {case}: evaluate auc {got}, all-pairs {want}");
    }
    Ok("200 instances equal the all-pairs concordance".into())
}

// ---------------------------------------------------------------- tuner

fn unit(names: &[&str]) -> SearchSpace {
    SearchSpace::new(names.iter().map(|n| Dimension::continuous(n, 0.0, 1.0, Scale::Linear)).collect()).unwrap()
}

fn real(h: &Hyperparams, k: &str) -> f64 {
    match h[k] {
        HyperValue::Real(v) => v,
        HyperValue::Choice(_) => f64::NAN,
    }
}

fn bo_efficiency() -> Check {
    let quadratic = |h: &Hyperparams| -> Result<f64, String> { Ok(-(real(h, "h") - 0.3).powi(2)) };
    let bowl = |h: &Hyperparams| -> Result<f64, String> { Ok(-((real(h, "a") - 0.25).powi(2) + (real(h, "b") - 0.75).powi(2))) };
    let line = unit(&["h"]);
    let mut close = 0;
    for seed in 0..20 {
        let best = bayes_opt(&line, quadratic, 15, seed).map_err(err)?;
        if (real(&best.best_hyperparams, "h") - 0.3).abs() <= 0.05 {
            close += 1;
        }
    }
    let plane = unit(&["a", "b"]);
    let mut wins = 0;
    for seed in 0..20 {
        let bo = bayes_opt(&plane, bowl, 15, seed).map_err(err)?.best_score;
        let rs = random_search(&plane, bowl, 15, seed).map_err(err)?.best_score;
        if bo >= rs {
            wins += 1;
        }
    }
    ensure!(close >= 16, "within 0.05 of the optimum in {close}/20 seeds");
    ensure!(wins >= 14, "bayes_opt at least as good as random search in {wins}/20 seeds");
    Ok(format!("1-D hits {close}/20, paired wins {wins}/20"))
}

// ---------------------------------------------------------------- lifecycle

fn improvement_reproduction() -> Check {
    let shipped = load_synthetic(&configs_dir().join("improvement.json")).map_err(err)?;
    let year = |k: i32| shipped.base_year + k;
    let span = shipped.years as i32;
    ensure!(span >= 12, "improvement config covers only {span} years");
    // train on the first quarter, test on three equal later spans
    let train = YearRange::new(year(0), year(span / 4 - 1)).map_err(err)?;
    let step = (span - span / 4) / 3;
    let tests: Vec<YearRange> = (0..3)
        .map(|i| YearRange::new(year(span / 4 + i * step), year(span / 4 + (i + 1) * step - 1)).unwrap())
        .collect();
    // per family: seeds with a latest gap of at least 2 points, monotone seeds, latest gaps
    let mut tally: BTreeMap<&str, (usize, usize, Vec<f64>)> = BTreeMap::new();
    for k in 0..10u64 {
        let mut cfg = shipped.clone();
        cfg.seed = shipped.seed + k;
        let data = generate_synthetic_cohort(&cfg).map_err(err)?;
        let request = ExperimentRequest {
            train,
            tests: tests.clone(),
            families: Family::ALL.to_vec(),
            budget: 6,
            seed: k,
            patient_ids: Vec::new(),
        };
        let report = temporal_experiment(&data, &request).map_err(err)?;
        for model in &report.models {
            let mut gaps = Vec::new();
            for range in &tests {
                // observed minus mean predicted survival, recomputed from the window
                let w = window(&data, *range).map_err(err)?.labeled();
                let cell = report.cell(&model.version_id, &range.label()).ok_or("missing cell")?;
                let observed = w
                    .records()
                    .iter()
                    .filter(|r| r.outcome.as_ref().is_some_and(|o| o.survival_months >= 60))
                    .count() as f64
                    / w.len() as f64;
                ensure!((observed - cell.observed_survival_rate).abs() < 1e-12, "observed rate mismatch on {range}");
                gaps.push(observed - cell.mean_predicted_survival);
            }
            let entry = tally.entry(model.family.as_str()).or_default();
            entry.0 += (gaps[2] >= 0.02) as usize;
            entry.1 += gaps.windows(2).all(|p| p[1] >= p[0]) as usize;
            entry.2.push(gaps[2]);
        }
    }
    let mut summary = Vec::new();
    for (family, (latest_ok, monotone, latest)) in &tally {
        ensure!(*latest_ok == 10, "{family}: latest-window gap below 2 points in {} of 10 seeds", 10 - latest_ok);
        ensure!(*monotone >= 8, "{family}: gap monotone in {monotone}/10 seeds");
        let mean = latest.iter().sum::<f64>() / latest.len() as f64;
        summary.push(format!("{family} latest gap mean {:.1} points, monotone {monotone}/10", 100.0 * mean));
    }
    ensure!(tally.len() == Family::ALL.len(), "models missing from the report");
    Ok(format!("train {train}, latest {}: {}", tests[2], summary.join("; ")))
}

fn uncertainty_widening() -> Check {
    let cfg = load_synthetic(&configs_dir().join("shifted.json")).map_err(err)?;
    let data = generate_synthetic_cohort(&cfg).map_err(err)?;
    let first = cfg.base_year;
    let last = cfg.base_year + cfg.years as i32 - 1;
    let early = window(&data, YearRange::new(first, first + 2).map_err(err)?).map_err(err)?;
    let late = window(&data, YearRange::new(last - 2, last).map_err(err)?).map_err(err)?;
    let (even, odd): (Vec<usize>, Vec<usize>) = (0..early.len()).partition(|i| i % 2 == 0);
    let train = early.subset(&even, "train");
    let held_out = early.subset(&odd, "held-out");
    let ensemble = EnsembleArtifact::bootstrap(
        Family::Logistic,
        &train,
        &Family::Logistic.default_hyperparams(),
        MachineConfig::default().ensemble_size,
        7,
    )
    .map_err(err)?;
    let stats = descriptive_stats(&train).map_err(err)?;
    let epistemic = |d: &Dataset| -> Result<Vec<f64>, String> {
        d.records()
            .iter()
            .map(|r| {
                let bare = PatientRecord {
                    outcome: None,
                    ..r.clone()
                };
                predict(&ensemble, &bare, &stats, 0).map(|p| p.uncertainty.epistemic).map_err(err)
            })
            .collect()
    };
    let reference = epistemic(&held_out)?;
    let current = epistemic(&late)?;
    let ratio = median(&current) / median(&reference);
    ensure!(ratio >= 1.2, "median epistemic ratio {ratio:.3} < 1.2");

    let summary = UncertaintySummary::from_samples(&reference, &current).ok_or("empty uncertainty sample")?;
    let state = LifecycleState::new(RetrainPolicy::default());
    let decision = evaluate_triggers(&state, &[], Some(&summary), None);
    ensure!(decision.retrain, "no retrain decision");
    ensure!(
        decision.reasons.contains(&TriggerReason::UncertaintyWidening),
        "reasons {:?}",
        decision.reasons
    );
    ensure!(TriggerReason::UncertaintyWidening.as_str() == "uncertainty_widening", "reason name");
    Ok(format!("median epistemic ratio {ratio:.2} ({} vs {})", late.window_label(), held_out.window_label()))
}

fn fuzz_policy() -> RetrainPolicy {
    RetrainPolicy {
        window_size: 40,
        min_outcomes: 15,
        ..RetrainPolicy::default()
    }
}

fn fuzz_config(seed: u64) -> MachineConfig {
    MachineConfig {
        ensemble_size: 2,
        families: vec![Family::Logistic],
        budget_per_family: 1,
        seed,
    }
}

fn without_outcome(r: &PatientRecord) -> PatientRecord {
    PatientRecord {
        outcome: None,
        ..r.clone()
    }
}

/// Drives a machine with random commands until `target` events are logged,
/// checking the safety properties after every command.
fn fuzz(seed: u64, target: usize) -> Result<Machine, String> {
    let mut cfg = SyntheticConfig::null_drift();
    cfg.years = 6;
    cfg.patients_per_year = 400;
    cfg.seed = seed;
    let data = generate_synthetic_cohort(&cfg).map_err(err)?;
    let records = data.records();
    let mut r = StdRng::seed_from_u64(seed);
    let mut m = Machine::new(data.schema().clone(), fuzz_policy(), fuzz_config(seed)).map_err(err)?;
    let first = m.ingest_batch(&records[..300]);
    m.designate_reference(ReferenceSource::Logged {
        dataset_id: first.dataset_id.ok_or("first batch not logged")?,
    })
    .map_err(err)?;
    m.deploy_initial().map_err(err)?;

    let mut pending: Vec<(String, usize)> = Vec::new();
    let mut cursor = 300;
    let mut served: Option<String> = None;
    while m.events().len() < target {
        let before_champion = m.state().champion.clone();
        match r.random_range(0..1000) {
            0..=449 => {
                let i = r.random_range(0..records.len());
                let resp = m.predict(&without_outcome(&records[i])).map_err(err)?;
                let version = resp.prediction.model_version.clone();
                if let Some(v) = &served {
                    ensure!(*v == version, "served model changed from {v} to {version} without a promotion");
                }
                served = Some(version);
                pending.push((resp.request_id, i));
            }
            450..=849 if !pending.is_empty() => {
                let (id, i) = pending.swap_remove(r.random_range(0..pending.len()));
                let outcome = records[i].outcome.clone().ok_or("unlabelled cohort record")?;
                m.post_outcome(&id, outcome.clone()).map_err(err)?;
                if r.random_bool(0.05) {
                    let again = m.post_outcome(&id, outcome);
                    ensure!(
                        matches!(again, Err(MachineError::Lifecycle(LifecycleError::DuplicateOutcome(_)))),
                        "duplicate outcome accepted"
                    );
                }
            }
            850..=869 => {
                let end = (cursor + r.random_range(1..60)).min(records.len());
                if cursor < end {
                    m.ingest_batch(&records[cursor..end]);
                    cursor = end;
                }
            }
            870..=879 if m.state().status != Status::Evaluating => {
                let _ = m.start_retrain();
            }
            880..=939 if !m.state().challengers.is_empty() => {
                let id = m.state().challengers[r.random_range(0..m.state().challengers.len())].clone();
                match m.promote(&id) {
                    Ok(_) => served = None,
                    Err(MachineError::PromotionRejected(e)) => {
                        ensure!(!e.is_strict_improvement(), "rejected a strict improvement")
                    }
                    Err(e) => return Err(e.to_string()),
                }
            }
            940..=944 if m.state().status == Status::Evaluating => {
                m.dismiss_challengers().map_err(err)?;
            }
            945..=949 => {
                let before = m.state().clone();
                let bogus = "no-such-request";
                ensure!(m.promote(bogus).is_err(), "promoted an unknown model");
                ensure!(m.state() == &before, "a rejected command changed the state");
            }
            _ => continue,
        }
        let s = m.state();
        s.check_invariants()?;
        ensure!(s.last_retrain <= s.t, "T {} > t {}", s.last_retrain, s.t);
        if s.champion != before_champion {
            let last = m.events().last().ok_or("empty log")?;
            let EventKind::Promoted(p) = &last.kind else {
                return Err(format!("champion changed by a {} event", last.kind.name()));
            };
            // recompute the shadow comparison from the prediction logs
            let (mut cand, mut champ, mut labels) = (Vec::new(), Vec::new(), Vec::new());
            for log in s.predictions.values() {
                if Some(&log.model_version) == before_champion.as_ref() {
                    if let (Some(l), Some(&c)) = (log.label, log.shadows.get(&p.version_id)) {
                        cand.push(c);
                        champ.push(log.probability);
                        labels.push(l);
                    }
                }
            }
            ensure!(labels.len() >= s.policy.min_outcomes, "promotion on {} outcomes", labels.len());
            let c = common::pairwise_auc(&cand, &labels).ok_or("one-class evidence")?;
            let h = common::pairwise_auc(&champ, &labels).ok_or("one-class evidence")?;
            ensure!(c > h, "promoted AUC {c} over champion {h}");
        }
    }
    Ok(m)
}

/// Two servers with the same seed and history; one keeps its challengers,
/// the other dismisses them. Served payloads must not differ.
fn shadow_isolation() -> Result<usize, String> {
    let dir = tempfile::tempdir().map_err(err)?;
    let with = common::Server::start(common::small_config(&dir.path().join("with"), 13));
    let without = common::Server::start(common::small_config(&dir.path().join("without"), 13));
    for s in [&with, &without] {
        let (status, body) = s.post("/models/retrain", "application/json", "{}");
        ensure!(status == 202, "retrain: {status} {body}");
        let done = s.wait_retrain(Duration::from_secs(300));
        ensure!(done["state"] == "succeeded", "retrain: {done}");
    }
    let (status, body) = without.post("/models/dismiss", "application/json", "{}");
    ensure!(status == 200, "dismiss: {status} {body}");
    let challengers = |s: &common::Server| s.get_json("/state")["challengers"].as_array().map_or(0, Vec::len);
    ensure!(challengers(&with) > 0, "no challengers to shadow");
    ensure!(challengers(&without) == 0, "dismiss left challengers");

    let events_before = with.event_count();
    let cohort = generate_synthetic_cohort(&common::cohort(13)).map_err(err)?;
    let mut compared = 0;
    for record in cohort.records().iter().skip(600).take(40) {
        let body = common::without_outcome(record).to_string();
        let (a_status, a) = with.post("/predict", "application/json", &body);
        let (b_status, b) = without.post("/predict", "application/json", &body);
        ensure!(a_status == 200 && b_status == 200, "predict: {a_status} {a} / {b_status} {b}");
        ensure!(a == b, "payloads differ:\n{a}\n{b}");
        compared += 1;
    }
    // the challengers really were scored on those requests
    let log = with.get_json(&format!("/events?from={}&limit=100", events_before + 1));
    let shadowed = log
        .as_array()
        .or_else(|| log["events"].as_array())
        .ok_or("unexpected /events shape")?
        .iter()
        .filter(|e| has_shadows(e))
        .count();
    ensure!(shadowed == compared, "{shadowed} of {compared} logged predictions carry shadow scores");
    Ok(compared)
}

fn has_shadows(v: &Value) -> bool {
    match v {
        Value::Object(map) => map.iter().any(|(k, v)| {
            (k == "shadows" && v.as_object().is_some_and(|o| !o.is_empty())) || has_shadows(v)
        }),
        Value::Array(items) => items.iter().any(has_shadows),
        _ => false,
    }
}

fn lifecycle_determinism() -> Check {
    // a 500-event log through the on-disk store and back
    let m = fuzz(42, 500)?;
    let dir = tempfile::tempdir().map_err(err)?;
    {
        let (mut store, existing) = Store::open(dir.path()).map_err(err)?;
        ensure!(existing.is_empty(), "fresh store not empty");
        store.append(m.events()).map_err(err)?;
    }
    let (_, events) = Store::open(dir.path()).map_err(err)?;
    ensure!(events.len() == m.events().len(), "store returned {} events", events.len());
    let rebuilt = Machine::replay(m.schema().clone(), fuzz_policy(), fuzz_config(42), events.clone()).map_err(err)?;
    ensure!(rebuilt.state() == m.state(), "replayed state differs");
    ensure!(rebuilt.registry() == m.registry(), "replayed registry differs");
    ensure!(replay(fuzz_policy(), &events).map_err(err)? == *m.state(), "pure fold differs");

    let mut total = 0;
    let mut promotions = 0;
    for seed in 0..10 {
        let m = fuzz(100 + seed, 10_000)?;
        total += m.events().len();
        promotions += m.events().iter().filter(|e| matches!(e.kind, EventKind::Promoted(_))).count();
    }
    ensure!(total >= 100_000, "only {total} fuzzed events");
    let compared = shadow_isolation()?;
    Ok(format!(
        "500-event replay exact; {total} fuzzed events, {promotions} promotions, no violation; {compared} payloads identical"
    ))
}

fn crash_recovery() -> Check {
    let dir = tempfile::tempdir().map_err(err)?;
    let mut cfg = common::small_config(&dir.path().join("data"), 17);
    cfg.bind = "127.0.0.1:0".into();
    cfg.machine.budget_per_family = 12;
    cfg.machine.ensemble_size = 5;
    let path = dir.path().join("service.json");
    std::fs::write(&path, serde_json::to_string_pretty(&cfg).map_err(err)?).map_err(err)?;
    let agent = common::agent();
    let url = |base: &str, p: &str| format!("{base}{p}");

    // first run: a mixed workload, then SIGKILL while a reader polls
    let mut run = common::start_binary(&path);
    let cohort = generate_synthetic_cohort(&common::cohort(17)).map_err(err)?;
    let records = &cohort.records()[500..];
    let mut ids = Vec::new();
    for record in &records[..60] {
        let (status, body) = common::post(&agent, &url(&run.base, "/predict"), "application/json", &common::without_outcome(record).to_string());
        ensure!(status == 200, "predict: {status} {body}");
        let v: Value = serde_json::from_str(&body).map_err(err)?;
        ids.push(v["request_id"].as_str().unwrap_or_default().to_string());
    }
    for (id, record) in ids.iter().zip(records).take(40) {
        let o = record.outcome.as_ref().ok_or("unlabelled record")?;
        let body = serde_json::json!({ "request_id": id, "survival_months": o.survival_months, "event": o.event });
        let (status, text) = common::post(&agent, &url(&run.base, "/outcomes"), "application/json", &body.to_string());
        ensure!(status == 200, "outcome: {status} {text}");
    }
    let batch: Vec<Value> = records[60..210].iter().map(|r| serde_json::to_value(r).unwrap()).collect();
    let (status, text) = common::post(&agent, &url(&run.base, "/datasets/batch"), "application/json", &Value::Array(batch).to_string());
    ensure!(status == 200, "batch: {status} {text}");
    let (_, before) = common::get(&agent, &url(&run.base, "/state"));
    let reader = {
        let base = run.base.clone();
        std::thread::spawn(move || {
            let agent = common::agent();
            for _ in 0..200 {
                if agent.get(&format!("{base}/state")).call().is_err() {
                    break;
                }
            }
        })
    };
    std::thread::sleep(Duration::from_millis(20));
    run.child.kill().map_err(err)?;
    run.child.wait().map_err(err)?;
    let _ = reader.join();

    let mut run = common::start_binary(&path);
    let (_, after) = common::get(&agent, &url(&run.base, "/state"));
    ensure!(after == before, "state after the first kill differs");

    // second run: SIGKILL while a retrain job is in flight
    let (status, text) = common::post(&agent, &url(&run.base, "/models/retrain"), "application/json", "{}");
    ensure!(status == 202, "retrain: {status} {text}");
    let (_, before) = common::get(&agent, &url(&run.base, "/state"));
    let (_, job) = common::get(&agent, &url(&run.base, "/models/retrain"));
    run.child.kill().map_err(err)?;
    run.child.wait().map_err(err)?;
    let job: Value = serde_json::from_str(&job).map_err(err)?;
    ensure!(job["state"] == "running", "retrain finished before the kill: {job}");

    let run = common::start_binary(&path);
    let (_, after) = common::get(&agent, &url(&run.base, "/state"));
    ensure!(after == before, "state after the mid-retrain kill differs");
    let (status, _) = common::post(&agent, &url(&run.base, "/predict"), "application/json", &common::without_outcome(&records[300]).to_string());
    ensure!(status == 200, "restarted server does not serve");
    let t = serde_json::from_str::<Value>(&after).map_err(err)?["t"].as_u64().unwrap_or(0);
    common::terminate(run);
    Ok(format!("two SIGKILL restarts reproduce /state (t = {t}, one during a retrain)"))
}

// ---------------------------------------------------------------- runner

struct Criterion {
    id: u32,
    name: &'static str,
    limit: Option<Duration>,
    run: fn() -> Check,
}

const fn criterion(id: u32, name: &'static str, limit_secs: u64, run: fn() -> Check) -> Criterion {
    Criterion {
        id,
        name,
        limit: if limit_secs == 0 { None } else { Some(Duration::from_secs(limit_secs)) },
        run,
    }
}

fn main() {
    let all = [
        criterion(1, "ks statistic equals brute-force ECDF difference", 10, ks_oracle),
        criterion(2, "null calibration of the drift report", 60, null_calibration),
        criterion(3, "power against a half-sd mean shift", 60, drift_power),
        criterion(4, "logistic detection calibration", 0, detection_calibration),
        criterion(5, "logistic gradient against central differences", 0, gradient_check),
        criterion(6, "evaluate auc equals all-pairs concordance", 0, auc_oracle),
        criterion(7, "bayesian optimisation efficiency", 120, bo_efficiency),
        criterion(8, "early model underestimates later survival", 300, improvement_reproduction),
        criterion(9, "uncertainty widening on the shifted cohort", 0, uncertainty_widening),
        criterion(10, "lifecycle replay, fuzzed safety and shadow isolation", 0, lifecycle_determinism),
        criterion(11, "state survives kill and restart", 0, crash_recovery),
    ];
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for c in all.iter().filter(|c| only.is_empty() || only.contains(&c.id)) {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(c.run)).unwrap_or_else(|panic| {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            Err(format!("panic: {msg}"))
        });
        let elapsed = start.elapsed();
        let result = match (result, c.limit) {
            (Ok(detail), Some(limit)) if elapsed > limit => Err(format!("{detail}, but took longer than {limit:?}")),
            (r, _) => r,
        };
        let (tag, detail) = match &result {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {:>2} {tag} {} [{:.1}s]: {detail}", c.id, c.name, elapsed.as_secs_f64());
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
