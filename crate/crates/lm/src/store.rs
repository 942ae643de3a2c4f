//! On-disk layout of a data directory.
//!
//! `events.ndjson` is the source of truth: one JSON event per line,
//! appended and fsynced before a request is answered. `manifest.json`
//! pins the schema, policy and machine settings the log was written under.
//! `models/`, `reports/`, `experiments/` and `snapshots/` hold derived JSON
//! copies that can always be regenerated from the log.

use std::fs::{self, File, OpenOptions};
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use lm_core::data::FeatureSchema;
use lm_core::lifecycle::{Event, EventKind, LifecycleState, MachineConfig, RetrainPolicy};
use serde::{Deserialize, Serialize};

pub const EVENT_LOG: &str = "events.ndjson";
pub const MANIFEST: &str = "manifest.json";
/// A state snapshot is written every this many events.
pub const SNAPSHOT_EVERY: u64 = 100;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path} line {line}: {detail}")]
    Corrupt { path: PathBuf, line: usize, detail: String },
    #[error("{path}: {source}")]
    Manifest { path: PathBuf, source: serde_json::Error },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: FeatureSchema,
    pub policy: RetrainPolicy,
    pub machine: MachineConfig,
}

#[derive(Debug)]
pub struct Store {
    dir: PathBuf,
    log: File,
    persisted: usize,
    /// Bytes dropped from a torn final line during recovery.
    pub truncated_bytes: u64,
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes `bytes` to `path` through a temporary file and a rename.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let tmp = path.with_extension("tmp");
    let mut f = File::create(&tmp).map_err(io_err(&tmp))?;
    f.write_all(bytes).map_err(io_err(&tmp))?;
    f.sync_all().map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

impl Store {
    /// Opens `dir`, creating it if needed, and returns the logged events.
    /// A final line without its newline is a write the process did not
    /// finish; it is cut off. Any other unreadable line is an error.
    pub fn open(dir: &Path) -> Result<(Store, Vec<Event>), StoreError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        for sub in ["models", "reports", "experiments", "snapshots"] {
            let p = dir.join(sub);
            fs::create_dir_all(&p).map_err(io_err(&p))?;
        }
        let path = dir.join(EVENT_LOG);
        let mut bytes = Vec::new();
        if path.exists() {
            File::open(&path)
                .and_then(|mut f| f.read_to_end(&mut bytes))
                .map_err(io_err(&path))?;
        }
        let complete = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
        let truncated_bytes = (bytes.len() - complete) as u64;
        let mut events: Vec<Event> = Vec::new();
        for (i, line) in bytes[..complete].split(|&b| b == b'\n').enumerate() {
            if line.is_empty() {
                continue;
            }
            let corrupt = |detail: String| StoreError::Corrupt {
                path: path.clone(),
                line: i + 1,
                detail,
            };
            let e: Event = serde_json::from_slice(line).map_err(|e| corrupt(e.to_string()))?;
            let expected = events.len() as u64 + 1;
            if e.index != expected {
                return Err(corrupt(format!("event index {} where {expected} was expected", e.index)));
            }
            events.push(e);
        }
        let log = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(io_err(&path))?;
        if truncated_bytes > 0 {
            log.set_len(complete as u64).map_err(io_err(&path))?;
            log.sync_all().map_err(io_err(&path))?;
        }
        let persisted = events.len();
        Ok((
            Store {
                dir: dir.to_path_buf(),
                log,
                persisted,
                truncated_bytes,
            },
            events,
        ))
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Events already on disk.
    pub fn persisted(&self) -> usize {
        self.persisted
    }

    pub fn read_manifest(&self) -> Result<Option<Manifest>, StoreError> {
        let path = self.dir.join(MANIFEST);
        if !path.exists() {
            return Ok(None);
        }
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        serde_json::from_str(&text)
            .map(Some)
            .map_err(|source| StoreError::Manifest { path, source })
    }

    pub fn write_manifest(&self, manifest: &Manifest) -> Result<(), StoreError> {
        let bytes = serde_json::to_vec_pretty(manifest).expect("manifest serialises");
        write_atomic(&self.dir.join(MANIFEST), &bytes)
    }

    /// Appends `events` in one write and syncs the file before returning.
    pub fn append(&mut self, events: &[Event]) -> Result<(), StoreError> {
        if events.is_empty() {
            return Ok(());
        }
        let mut buf = Vec::new();
        for e in events {
            serde_json::to_writer(&mut buf, e).expect("events serialise");
            buf.push(b'\n');
        }
        let path = self.dir.join(EVENT_LOG);
        self.log.write_all(&buf).map_err(io_err(&path))?;
        self.log.sync_data().map_err(io_err(&path))?;
        self.persisted += events.len();
        Ok(())
    }

    /// Writes the artifact copies an event carries.
    pub fn write_artifacts(&self, event: &Event) -> Result<(), StoreError> {
        match &event.kind {
            EventKind::RetrainStarted(r) => {
                for c in &r.candidates {
                    self.put("models", lm_core::model::Scorer::version_id(c), c)?;
                }
            }
            EventKind::DriftReportComputed(d) => self.put("reports", &d.report.id, &d.report)?,
            EventKind::ExperimentRecorded(e) => self.put("experiments", &e.id, &**e)?,
            _ => {}
        }
        Ok(())
    }

    /// Writes `state` as the snapshot taken after event `index`.
    pub fn write_snapshot(&self, index: u64, state: &LifecycleState) -> Result<(), StoreError> {
        self.put("snapshots", &format!("state-{index:08}"), state)
    }

    fn put(&self, sub: &str, id: &str, value: &impl Serialize) -> Result<(), StoreError> {
        let bytes = serde_json::to_vec_pretty(value).expect("artifact serialises");
        write_atomic(&self.dir.join(sub).join(format!("{id}.json")), &bytes)
    }
}
