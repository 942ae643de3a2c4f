use std::fs;
use std::path::{Path, PathBuf};

use lm_core::data::{FeatureSchema, SyntheticConfig, YearRange};
use lm_core::lifecycle::{MachineConfig, RetrainPolicy};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Parse { path: String, source: serde_json::Error },
    #[error("{path}: {detail}")]
    Invalid { path: String, detail: String },
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, ConfigError> {
    let p = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io { path: p.clone(), source })?;
    serde_json::from_str(&text).map_err(|source| ConfigError::Parse { path: p, source })
}

/// Reads and validates a synthetic-cohort config.
pub fn load_synthetic(path: &Path) -> Result<SyntheticConfig, ConfigError> {
    let cfg: SyntheticConfig = read_json(path)?;
    cfg.validate().map_err(|e| ConfigError::Invalid {
        path: path.display().to_string(),
        detail: e.to_string(),
    })?;
    Ok(cfg)
}

/// Data loaded at first start, when the event log is empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bootstrap {
    #[serde(default)]
    pub synthetic: Option<SyntheticConfig>,
    #[serde(default)]
    pub csv: Option<PathBuf>,
    /// Diagnosis years ingested as the reference; every record when absent.
    #[serde(default)]
    pub reference_years: Option<YearRange>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    #[serde(default = "default_bind")]
    pub bind: String,
    #[serde(default = "default_data_dir")]
    pub data_dir: PathBuf,
    #[serde(default)]
    pub policy: RetrainPolicy,
    #[serde(default = "FeatureSchema::default_seer")]
    pub schema: FeatureSchema,
    #[serde(default)]
    pub machine: MachineConfig,
    #[serde(default)]
    pub bootstrap: Option<Bootstrap>,
    /// Start a retrain in the background when a drift report requests one.
    #[serde(default = "yes")]
    pub auto_retrain: bool,
    /// Directory of dashboard files served under `/ui`.
    #[serde(default)]
    pub ui_dir: Option<PathBuf>,
}

fn default_bind() -> String {
    "127.0.0.1:8080".into()
}

fn default_data_dir() -> PathBuf {
    PathBuf::from("data")
}

fn yes() -> bool {
    true
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            bind: default_bind(),
            data_dir: default_data_dir(),
            policy: RetrainPolicy::default(),
            schema: FeatureSchema::default_seer(),
            machine: MachineConfig::default(),
            bootstrap: None,
            auto_retrain: true,
            ui_dir: None,
        }
    }
}

impl ServiceConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let cfg: ServiceConfig = read_json(path)?;
        let invalid = |detail: String| ConfigError::Invalid {
            path: path.display().to_string(),
            detail,
        };
        cfg.policy.validate().map_err(|e| invalid(e.to_string()))?;
        if let Some(b) = &cfg.bootstrap {
            match (&b.synthetic, &b.csv) {
                (Some(s), None) => s.validate().map_err(|e| invalid(e.to_string()))?,
                (None, Some(_)) => {}
                _ => return Err(invalid("bootstrap needs exactly one of `synthetic` or `csv`".into())),
            }
        }
        if cfg.machine.families.is_empty() {
            return Err(invalid("machine.families is empty".into()));
        }
        Ok(cfg)
    }
}
