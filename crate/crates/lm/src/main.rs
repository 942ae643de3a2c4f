use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lm_core::data::{generate_synthetic_cohort, FeatureSchema, YearRange};
use lm_core::drift::{drift_report, DriftReport, ReportLabels, TestMethod, Verdict, VerdictPolicy};
use lm_core::lifecycle::{temporal_experiment, ExperimentReport, ExperimentRequest};
use lm_core::Family;

use lm::config::{load_synthetic, ServiceConfig};
use lm::csvio;

/// Monitored prognosis models: data generation, drift monitoring,
/// temporal experiments and the deployment service.
#[derive(Debug, Parser)]
#[command(name = "lm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic cohort as CSV.
    Generate {
        /// Synthetic cohort config (JSON).
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Compare a window of records with a reference and print the drift
    /// report. Exit code: 0 no drift, 2 warn, 3 drift, 1 error.
    Monitor {
        #[arg(long)]
        reference: PathBuf,
        #[arg(long)]
        window: PathBuf,
        /// Benjamini-Hochberg level for the per-feature tests.
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Seed for the logistic-detection folds.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Feature schema (JSON); the built-in breast-cancer schema otherwise.
        #[arg(long)]
        schema: Option<PathBuf>,
        /// Also write the report as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train on one span of diagnosis years and test on later spans.
    Experiment {
        #[arg(long)]
        data: PathBuf,
        /// Train years, `1982-1992`.
        #[arg(long)]
        train: YearRange,
        /// Test years; repeat for several windows.
        #[arg(long = "test", required = true)]
        tests: Vec<YearRange>,
        /// Comma-separated model families.
        #[arg(long, value_delimiter = ',', value_parser = parse_family, default_value = "logistic,tree_ensemble")]
        families: Vec<Family>,
        /// Objective evaluations per family.
        #[arg(long, default_value_t = 8)]
        budget: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Patients whose per-model predictions go in the report.
        #[arg(long, value_delimiter = ',')]
        patients: Vec<String>,
        #[arg(long)]
        schema: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the HTTP service.
    Serve {
        /// Service config (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Overrides `data_dir` in the config.
        #[arg(long, env = "LM_DATA_DIR")]
        data_dir: Option<PathBuf>,
        /// Overrides `bind` in the config.
        #[arg(long)]
        bind: Option<String>,
    },
}

fn parse_family(s: &str) -> Result<Family, String> {
    Family::parse(s).ok_or_else(|| format!("unknown family `{s}` (expected logistic or tree_ensemble)"))
}

type Failure = String;

fn load_schema(path: Option<&Path>) -> Result<FeatureSchema, Failure> {
    let Some(path) = path else {
        return Ok(FeatureSchema::default_seer());
    };
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let schema: FeatureSchema = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    FeatureSchema::new(schema.features().to_vec()).map_err(|e| format!("{}: {e}", path.display()))
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).expect("serialises");
    text.push('\n');
    fs::write(path, text).map_err(|e| format!("{}: {e}", path.display()))
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn generate(config: &Path, out: &Path, seed: Option<u64>) -> Result<(), Failure> {
    let mut cfg = load_synthetic(config).map_err(|e| e.to_string())?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let data = generate_synthetic_cohort(&cfg).map_err(|e| e.to_string())?;
    csvio::save_dataset(out, &data).map_err(|e| e.to_string())?;
    let span = data.year_span().map(|r| r.to_string()).unwrap_or_default();
    println!("wrote {} rows, years {span}, to {}", data.len(), out.display());
    Ok(())
}

fn render_report(r: &DriftReport) -> String {
    let mut s = format!("drift report {} vs {}\n", r.window_id, r.reference_id);
    s.push_str(&format!(
        "{:<14} {:>8} {:>11} {:>10} {:>9} {:>8}\n",
        "feature", "method", "statistic", "p-value", "boundary", "flagged"
    ));
    for (name, f) in &r.features {
        let boundary = f.boundary_adherence.map(|b| format!("{b:.3}")).unwrap_or_else(|| "-".into());
        s.push_str(&format!(
            "{:<14} {:>8} {:>11.4} {:>10.4} {:>9} {:>8}\n",
            name,
            match f.test.method {
                TestMethod::KolmogorovSmirnov => "ks",
                TestMethod::ChiSquare => "chi2",
            },
            f.test.statistic,
            f.test.p_value,
            boundary,
            if r.corrected_flags.get(name).copied().unwrap_or(false) { "yes" } else { "no" },
        ));
    }
    s.push_str(&format!(
        "detection: auc {:.4}, score {:.4} ({} folds)\n",
        r.detection.auc, r.detection.score, r.detection.n_folds
    ));
    s.push_str(&format!("verdict: {}\n", r.verdict.as_str()));
    s
}

fn monitor(
    reference: &Path,
    window: &Path,
    alpha: f64,
    seed: u64,
    schema: Option<&Path>,
    out: Option<&Path>,
) -> Result<Verdict, Failure> {
    let schema = load_schema(schema)?;
    let a = csvio::load_dataset(reference, &schema).map_err(|e| format!("{}: {e}", reference.display()))?;
    let b = csvio::load_dataset(window, &schema).map_err(|e| format!("{}: {e}", window.display()))?;
    let labels = ReportLabels {
        id: format!("{}-vs-{}", stem(window), stem(reference)),
        reference_id: stem(reference),
        window_id: stem(window),
        created_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
    };
    let report = drift_report(&a, &b, None, &VerdictPolicy::with_alpha(alpha), seed, labels).map_err(|e| e.to_string())?;
    print!("{}", render_report(&report));
    if let Some(out) = out {
        write_json(out, &report)?;
    }
    Ok(report.verdict)
}

fn render_grid(r: &ExperimentReport) -> String {
    let width = r.models.iter().map(|m| m.version_id.len() + m.family.as_str().len() + 3).max().unwrap_or(5);
    let mut s = format!("train {} (AUC, then observed - mean predicted survival)\n", r.train_window);
    s.push_str(&format!("{:<width$}", "model"));
    for w in &r.test_windows {
        s.push_str(&format!(" {w:>20}"));
    }
    s.push('\n');
    for m in &r.models {
        s.push_str(&format!("{:<width$}", format!("{} ({})", m.version_id, m.family.as_str())));
        for w in &r.test_windows {
            let cell = match r.cell(&m.version_id, w) {
                Some(c) => format!("{:.3} {:+.3}", c.auc, c.calibration_gap()),
                None => "-".into(),
            };
            s.push_str(&format!(" {cell:>20}"));
        }
        s.push('\n');
    }
    s
}

fn experiment(
    data: &Path,
    request: ExperimentRequest,
    schema: Option<&Path>,
    out: &Path,
) -> Result<(), Failure> {
    let schema = load_schema(schema)?;
    let dataset = csvio::load_dataset(data, &schema).map_err(|e| format!("{}: {e}", data.display()))?;
    let report = temporal_experiment(&dataset, &request).map_err(|e| e.to_string())?;
    print!("{}", render_grid(&report));
    write_json(out, &report)
}

fn serve(config: &Path, data_dir: Option<PathBuf>, bind: Option<String>) -> Result<(), Failure> {
    let mut cfg = ServiceConfig::load(config).map_err(|e| e.to_string())?;
    if let Some(d) = data_dir {
        cfg.data_dir = d;
    }
    if let Some(b) = bind {
        cfg.bind = b;
    }
    let rt = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    rt.block_on(lm::service::serve(cfg)).map_err(|e| e.to_string())
}

fn run(cli: Cli) -> Result<ExitCode, Failure> {
    match cli.command {
        Command::Generate { config, out, seed } => generate(&config, &out, seed).map(|_| ExitCode::SUCCESS),
        Command::Monitor {
            reference,
            window,
            alpha,
            seed,
            schema,
            out,
        } => {
            let verdict = monitor(&reference, &window, alpha, seed, schema.as_deref(), out.as_deref())?;
            Ok(ExitCode::from(match verdict {
                Verdict::None => 0,
                Verdict::Warn => 2,
                Verdict::Drift => 3,
            }))
        }
        Command::Experiment {
            data,
            train,
            tests,
            families,
            budget,
            seed,
            patients,
            schema,
            out,
        } => {
            let request = ExperimentRequest {
                train,
                tests,
                families,
                budget,
                seed,
                patient_ids: patients,
            };
            experiment(&data, request, schema.as_deref(), &out).map(|_| ExitCode::SUCCESS)
        }
        Command::Serve { config, data_dir, bind } => serve(&config, data_dir, bind).map(|_| ExitCode::SUCCESS),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
