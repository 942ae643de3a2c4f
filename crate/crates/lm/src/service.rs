//! JSON-over-HTTP deployment server.
//!
//! All writes go through one mutex around the [`Machine`] and the
//! [`Store`]: a handler applies its command, the new events are appended
//! and synced, and only then is the response sent. Retraining and
//! experiments run on their own threads and publish their results as
//! events when they finish.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, MutexGuard};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use lm_core::data::{
    descriptive_stats, evaluable_label, generate_synthetic_cohort, window, DataError, Outcome, PatientRecord,
    VitalStatus, YearRange,
};
use lm_core::lifecycle::{
    ExperimentRequest, LifecycleError, Machine, MachineError, PromotionEvidence, ReferenceSource, RejectedRow,
    RetrainJob, Status,
};
use lm_core::model::{ModelError, Scorer, ServedModel};
use lm_core::Dataset;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{ConfigError, ServiceConfig};
use crate::csvio::{self, CsvError};
use crate::store::{Manifest, Store, StoreError, SNAPSHOT_EVERY};

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("recovering the event log: {0}")]
    Machine(#[from] MachineError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("bootstrap data: {0}")]
    Csv(#[from] CsvError),
    #[error("bootstrap data: {0}")]
    Data(#[from] DataError),
    #[error("bootstrap: {0}")]
    Bootstrap(String),
    #[error("{context}: {source}")]
    Io { context: String, source: std::io::Error },
}

/// An error response: a status code and a JSON body with an `error` field.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: Value,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            body: json!({ "error": message.into() }),
        }
    }

    fn with(mut self, key: &str, value: Value) -> Self {
        self.body[key] = value;
        self
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }

    fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, message)
    }

    fn conflict(message: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, message)
    }

    fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

fn data_error_field(e: &DataError) -> Option<&str> {
    match e {
        DataError::MissingFeature { feature, .. }
        | DataError::UnknownFeature { feature, .. }
        | DataError::OutOfRange { feature, .. }
        | DataError::UnknownCategory { feature, .. }
        | DataError::WrongType { feature, .. } => Some(feature),
        _ => None,
    }
}

impl From<MachineError> for ApiError {
    fn from(e: MachineError) -> Self {
        let msg = e.to_string();
        match e {
            MachineError::Invalid(d) => {
                let err = ApiError::bad_request(msg);
                match data_error_field(&d) {
                    Some(f) => err.with("field", json!(f)),
                    None => err,
                }
            }
            MachineError::NoChampion => ApiError::new(StatusCode::SERVICE_UNAVAILABLE, msg),
            MachineError::UnknownModel(_) => ApiError::not_found(msg),
            MachineError::ReferenceTooSmall { .. } => ApiError::bad_request(msg),
            MachineError::PromotionRejected(evidence) => {
                ApiError::conflict(msg).with("comparison", serde_json::to_value(evidence).expect("serialises"))
            }
            MachineError::RetrainFailed(_) => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, msg),
            MachineError::Lifecycle(l) => match l {
                LifecycleError::UnknownRequest(_) | LifecycleError::UnknownDataset(_) => ApiError::not_found(msg),
                LifecycleError::DuplicateOutcome(_)
                | LifecycleError::DuplicateRequest(_)
                | LifecycleError::DuplicateId(_)
                | LifecycleError::InvalidStatus { .. }
                | LifecycleError::NotChallenger(_)
                | LifecycleError::NoReference
                | LifecycleError::StalePrevious { .. } => ApiError::conflict(msg),
                LifecycleError::InsufficientEvidence { evidence, .. } => {
                    ApiError::conflict(msg).with("comparison", serde_json::to_value(evidence).expect("serialises"))
                }
                LifecycleError::NoChampion => ApiError::new(StatusCode::SERVICE_UNAVAILABLE, msg),
                _ => ApiError::internal(msg),
            },
            MachineError::Model(ModelError::SchemaMismatch(_)) => ApiError::bad_request(msg),
            _ => ApiError::internal(msg),
        }
    }
}

type ApiResult<T> = Result<T, ApiError>;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobState {
    #[default]
    Idle,
    Running,
    Succeeded,
    Failed,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RetrainStatus {
    pub state: JobState,
    /// Event cursor when the job took its snapshot of the history.
    pub started_at_event: Option<u64>,
    pub challengers: Vec<String>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentStatus {
    pub id: String,
    pub state: JobState,
    pub error: Option<String>,
}

#[derive(Default)]
struct Jobs {
    retrain: RetrainStatus,
    experiments: BTreeMap<String, ExperimentStatus>,
}

struct Inner {
    machine: Machine,
    store: Store,
    /// Set when an append failed; the in-memory state is ahead of the log.
    broken: Option<String>,
}

impl Inner {
    fn persist(&mut self) -> ApiResult<()> {
        let from = self.store.persisted();
        let events = &self.machine.events()[from..];
        if events.is_empty() {
            return Ok(());
        }
        if let Err(e) = self.store.append(events) {
            let msg = format!("event log write failed, restart to recover: {e}");
            self.broken = Some(msg.clone());
            return Err(ApiError::internal(msg));
        }
        for e in events {
            if let Err(err) = self.store.write_artifacts(e) {
                eprintln!("warning: {err}");
            }
        }
        let first = events[0].index;
        let last = events[events.len() - 1].index;
        if last / SNAPSHOT_EVERY > (first - 1) / SNAPSHOT_EVERY {
            if let Err(err) = self.store.write_snapshot(last, self.machine.state()) {
                eprintln!("warning: {err}");
            }
        }
        Ok(())
    }
}

/// Shared service state.
pub struct App {
    inner: Mutex<Inner>,
    jobs: Mutex<Jobs>,
    auto_retrain: bool,
    ui_dir: Option<PathBuf>,
}

fn utc_now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|p| p.into_inner())
}

impl App {
    /// Opens the data directory, replays its log, and on an empty log runs
    /// the configured bootstrap.
    pub fn open(config: &ServiceConfig) -> Result<App, ServiceError> {
        let (store, events) = Store::open(&config.data_dir)?;
        if store.truncated_bytes > 0 {
            eprintln!("recovery: dropped {} bytes of an unfinished final event", store.truncated_bytes);
        }
        let wanted = Manifest {
            schema: config.schema.clone(),
            policy: config.policy,
            machine: config.machine.clone(),
        };
        let manifest = match store.read_manifest()? {
            Some(m) => {
                if m != wanted {
                    eprintln!("note: using the schema, policy and machine settings recorded in the data directory");
                }
                m
            }
            None => {
                store.write_manifest(&wanted)?;
                wanted
            }
        };
        let fresh = events.is_empty();
        let machine = if fresh {
            Machine::new(manifest.schema, manifest.policy, manifest.machine)?
        } else {
            Machine::replay(manifest.schema, manifest.policy, manifest.machine, events)?
        }
        .with_clock(utc_now);
        let mut inner = Inner {
            machine,
            store,
            broken: None,
        };
        if fresh {
            if let Some(b) = &config.bootstrap {
                bootstrap(&mut inner.machine, b)?;
                inner.persist().map_err(|e| ServiceError::Bootstrap(e.body["error"].to_string()))?;
            }
        }
        let app = App {
            inner: Mutex::new(inner),
            jobs: Mutex::new(Jobs::default()),
            auto_retrain: config.auto_retrain,
            ui_dir: config.ui_dir.clone(),
        };
        Ok(app)
    }

    /// Runs `f` on the machine and persists whatever events it produced,
    /// also when `f` fails.
    fn write<T>(self: &Arc<Self>, f: impl FnOnce(&mut Machine) -> ApiResult<T>) -> ApiResult<T> {
        let (out, pending) = {
            let mut inner = lock(&self.inner);
            if let Some(msg) = &inner.broken {
                return Err(ApiError::new(StatusCode::SERVICE_UNAVAILABLE, msg.clone()));
            }
            let out = f(&mut inner.machine);
            inner.persist()?;
            (out, inner.machine.state().status == Status::RetrainPending)
        };
        if pending && self.auto_retrain {
            let _ = self.spawn_retrain();
        }
        out
    }

    fn read<T>(&self, f: impl FnOnce(&Machine) -> T) -> T {
        f(&lock(&self.inner).machine)
    }

    /// Starts a background retrain unless one is running or challengers
    /// are under evaluation.
    pub fn spawn_retrain(self: &Arc<Self>) -> ApiResult<RetrainStatus> {
        let mut jobs = lock(&self.jobs);
        if jobs.retrain.state == JobState::Running {
            return Err(ApiError::conflict("a retrain is already running"));
        }
        let (job, cursor): (RetrainJob, u64) = {
            let inner = lock(&self.inner);
            let job = inner.machine.prepare_retrain()?;
            (job, inner.machine.state().event_cursor)
        };
        jobs.retrain = RetrainStatus {
            state: JobState::Running,
            started_at_event: Some(cursor),
            challengers: Vec::new(),
            error: None,
        };
        let status = jobs.retrain.clone();
        drop(jobs);
        let app = Arc::clone(self);
        std::thread::spawn(move || {
            let outcome = job.run();
            let result = app.write(|m| m.finish_retrain(outcome).map_err(ApiError::from));
            let mut jobs = lock(&app.jobs);
            match result {
                Ok(ids) => {
                    jobs.retrain.state = JobState::Succeeded;
                    jobs.retrain.challengers = ids;
                }
                Err(e) => {
                    jobs.retrain.state = JobState::Failed;
                    jobs.retrain.error = Some(e.body["error"].as_str().unwrap_or_default().to_string());
                }
            }
        });
        Ok(status)
    }

    pub fn retrain_status(&self) -> RetrainStatus {
        lock(&self.jobs).retrain.clone()
    }

    /// Starts a retrain if the last write left one pending; used after a
    /// restart.
    pub fn resume(self: &Arc<Self>) {
        let pending = self.read(|m| m.state().status == Status::RetrainPending);
        if pending && self.auto_retrain {
            let _ = self.spawn_retrain();
        }
    }

    fn spawn_experiment(self: &Arc<Self>, request: ExperimentRequest) -> ApiResult<ExperimentStatus> {
        let (id, history) = {
            let mut inner = lock(&self.inner);
            if let Some(msg) = &inner.broken {
                return Err(ApiError::new(StatusCode::SERVICE_UNAVAILABLE, msg.clone()));
            }
            let history = inner.machine.history()?;
            check_experiment(&history, &request)?;
            (inner.machine.allocate_experiment_id(), history)
        };
        let status = ExperimentStatus {
            id: id.clone(),
            state: JobState::Running,
            error: None,
        };
        lock(&self.jobs).experiments.insert(id.clone(), status.clone());
        let app = Arc::clone(self);
        std::thread::spawn(move || {
            let result = lm_core::lifecycle::temporal_experiment(&history, &request)
                .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))
                .and_then(|mut report| {
                    report.id = id.clone();
                    app.write(|m| m.record_experiment(report).map_err(ApiError::from))
                });
            let mut jobs = lock(&app.jobs);
            let entry = jobs.experiments.get_mut(&id).expect("inserted above");
            match result {
                Ok(_) => entry.state = JobState::Succeeded,
                Err(e) => {
                    entry.state = JobState::Failed;
                    entry.error = Some(e.body["error"].as_str().unwrap_or_default().to_string());
                }
            }
        });
        Ok(status)
    }
}

/// Rejects requests whose windows cannot be trained or scored.
fn check_experiment(history: &Dataset, request: &ExperimentRequest) -> ApiResult<()> {
    if request.tests.is_empty() {
        return Err(ApiError::bad_request("no test windows requested"));
    }
    if request.families.is_empty() {
        return Err(ApiError::bad_request("no model families requested"));
    }
    if request.budget == 0 {
        return Err(ApiError::bad_request("budget must be at least 1"));
    }
    for t in &request.tests {
        if *t != request.train && t.overlaps(&request.train) {
            return Err(ApiError::bad_request(format!(
                "test window {t} overlaps train window {}",
                request.train
            )));
        }
    }
    for range in std::iter::once(&request.train).chain(&request.tests) {
        let any = history
            .records()
            .iter()
            .any(|r| range.contains(r.diagnosis_year) && evaluable_label(r).is_some());
        if !any {
            return Err(ApiError::bad_request(format!("no patients in range {range}")).with("range", json!(range)));
        }
    }
    Ok(())
}

fn bootstrap(machine: &mut Machine, b: &crate::config::Bootstrap) -> Result<(), ServiceError> {
    let data = match (&b.synthetic, &b.csv) {
        (Some(s), _) => generate_synthetic_cohort(s)?,
        (None, Some(path)) => csvio::load_dataset(path, machine.schema())?,
        (None, None) => return Err(ServiceError::Bootstrap("no bootstrap data source".into())),
    };
    if data.schema() != machine.schema() {
        return Err(ServiceError::Bootstrap("bootstrap data does not use the configured schema".into()));
    }
    let reference = match b.reference_years {
        Some(r) => window(&data, r)?,
        None => data,
    };
    let summary = machine.ingest_batch(reference.records());
    let dataset_id = summary
        .dataset_id
        .ok_or_else(|| ServiceError::Bootstrap("no bootstrap record validated".into()))?;
    machine.designate_reference(ReferenceSource::Logged { dataset_id })?;
    machine.deploy_initial()?;
    Ok(())
}

fn parse_json<T: for<'de> Deserialize<'de>>(body: &[u8]) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid request body: {e}")))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(format!("request task failed: {e}")))?
}

type Shared = State<Arc<App>>;

async fn health(State(app): Shared) -> Json<Value> {
    let (champion, t, events) = app.read(|m| {
        (
            m.state().champion.clone(),
            m.state().t,
            m.events().len(),
        )
    });
    Json(json!({
        "status": "ok",
        "champion": champion.unwrap_or_else(|| "none deployed".into()),
        "t": t,
        "events": events,
    }))
}

async fn predict(State(app): Shared, body: Bytes) -> ApiResult<Response> {
    let record: PatientRecord = parse_json(&body)?;
    let resp = blocking(move || app.write(|m| m.predict(&record).map_err(ApiError::from))).await?;
    Ok(Json(resp).into_response())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutcomeRequest {
    request_id: String,
    #[serde(default)]
    decision: String,
    survival_months: u32,
    event: VitalStatus,
}

async fn post_outcome(State(app): Shared, body: Bytes) -> ApiResult<Json<Value>> {
    let req: OutcomeRequest = parse_json(&body)?;
    let id = req.request_id.clone();
    let outcome = Outcome {
        survival_months: req.survival_months,
        event: req.event,
        decision: req.decision,
        recorded_at_step: 0,
    };
    let label = blocking(move || {
        app.write(|m| {
            m.post_outcome(&id, outcome)?;
            Ok(m.state().predictions[&id].label)
        })
    })
    .await?;
    Ok(Json(json!({ "request_id": req.request_id, "label": label })))
}

/// Records with their position in the submitted batch.
type Positioned = Vec<(usize, PatientRecord)>;

/// Splits a batch body into parsed records (with their positions) and
/// rows that could not be read at all.

fn batch_rows(headers: &HeaderMap, body: &[u8], app: &App) -> ApiResult<(Positioned, Vec<RejectedRow>)> {
    let is_csv = headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.starts_with("text/csv"));
    let mut ok = Vec::new();
    let mut bad = Vec::new();
    if is_csv {
        let schema = app.read(|m| m.schema().clone());
        let rows = csvio::parse_rows(body, &schema).map_err(|e| ApiError::bad_request(e.to_string()))?;
        for (i, row) in rows.into_iter().enumerate() {
            match row {
                Ok(r) => ok.push((i, r)),
                Err(e) => bad.push(RejectedRow {
                    row: i,
                    patient_id: None,
                    reason: e.to_string(),
                }),
            }
        }
    } else {
        let values: Vec<Value> = parse_json(body)?;
        for (i, v) in values.into_iter().enumerate() {
            let pid = v.get("patient_id").and_then(Value::as_str).map(String::from);
            match serde_json::from_value::<PatientRecord>(v) {
                Ok(r) => ok.push((i, r)),
                Err(e) => bad.push(RejectedRow {
                    row: i,
                    patient_id: pid,
                    reason: e.to_string(),
                }),
            }
        }
    }
    Ok((ok, bad))
}

async fn ingest_batch(State(app): Shared, headers: HeaderMap, body: Bytes) -> ApiResult<Response> {
    let summary = blocking(move || {
        let (rows, unreadable) = batch_rows(&headers, &body, &app)?;
        let submitted = rows.len() + unreadable.len();
        let (positions, records): (Vec<usize>, Vec<PatientRecord>) = rows.into_iter().unzip();
        app.write(|m| {
            let mut s = m.ingest_batch(&records);
            for r in &mut s.rejected {
                r.row = positions[r.row];
            }
            s.rejected.extend(unreadable);
            s.rejected.sort_by_key(|r| r.row);
            s.submitted = submitted;
            Ok(s)
        })
    })
    .await?;
    Ok(Json(summary).into_response())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReferenceRequest {
    dataset_id: Option<String>,
    records: Option<Vec<PatientRecord>>,
}

async fn designate_reference(State(app): Shared, body: Bytes) -> ApiResult<Json<Value>> {
    let req: ReferenceRequest = parse_json(&body)?;
    let source = match (req.dataset_id, req.records) {
        (Some(dataset_id), None) => ReferenceSource::Logged { dataset_id },
        (None, Some(records)) => ReferenceSource::Inline { records },
        _ => return Err(ApiError::bad_request("give exactly one of `dataset_id` or `records`")),
    };
    let id = blocking(move || app.write(|m| m.designate_reference(source).map_err(ApiError::from))).await?;
    Ok(Json(json!({ "reference_id": id })))
}

#[derive(Debug, Serialize)]
struct DatasetEntry {
    id: String,
    records: usize,
    labeled: usize,
    years: Option<YearRange>,
}

fn entry(id: &str, records: &[PatientRecord]) -> DatasetEntry {
    let years = records.iter().map(|r| r.diagnosis_year);
    DatasetEntry {
        id: id.into(),
        records: records.len(),
        labeled: records.iter().filter(|r| evaluable_label(r).is_some()).count(),
        years: match (years.clone().min(), years.max()) {
            (Some(a), Some(b)) => Some(YearRange { start: a, end: b }),
            _ => None,
        },
    }
}

async fn list_datasets(State(app): Shared) -> Json<Value> {
    app.read(|m| {
        let r = m.registry();
        let datasets: Vec<_> = r.datasets.iter().map(|(id, recs)| entry(id, recs)).collect();
        let references: Vec<_> = r.references.iter().map(|(id, d)| entry(id, d.records())).collect();
        Json(json!({
            "datasets": datasets,
            "references": references,
            "history": entry("history", &r.history),
            "current_reference": m.state().reference_id,
        }))
    })
}

#[derive(Debug, Deserialize)]
struct StatsQuery {
    start: Option<i32>,
    end: Option<i32>,
    dataset_id: Option<String>,
}

async fn dataset_stats(State(app): Shared, Query(q): Query<StatsQuery>) -> ApiResult<Response> {
    let data = app.read(|m| -> ApiResult<Dataset> {
        match &q.dataset_id {
            None => Ok(m.history()?),
            Some(id) => {
                let r = m.registry();
                if let Some(d) = r.references.get(id) {
                    return Ok(d.clone());
                }
                let recs = r.datasets.get(id).ok_or_else(|| ApiError::not_found(format!("unknown dataset id {id}")))?;
                Dataset::new(m.schema().clone(), recs.clone(), id.as_str()).map_err(|e| ApiError::internal(e.to_string()))
            }
        }
    })?;
    let data = match (q.start, q.end) {
        (None, None) => data,
        (start, end) => {
            let span = data.year_span();
            let range = YearRange::new(
                start.or(span.map(|s| s.start)).unwrap_or(i32::MIN),
                end.or(span.map(|s| s.end)).unwrap_or(i32::MAX),
            )
            .map_err(|e| ApiError::bad_request(e.to_string()))?;
            match window(&data, range) {
                Ok(w) => w,
                Err(DataError::EmptyWindow { .. }) => {
                    return Err(ApiError::not_found(format!("no patients in range {range}")))
                }
                Err(e) => return Err(ApiError::bad_request(e.to_string())),
            }
        }
    };
    if data.is_empty() {
        return Err(ApiError::not_found("no patients in range"));
    }
    let stats = descriptive_stats(&data).map_err(|e| ApiError::internal(e.to_string()))?;
    Ok(Json(json!({ "window_label": data.window_label(), "records": data.len(), "stats": stats })).into_response())
}

#[derive(Debug, Deserialize)]
struct ReportsQuery {
    latest: Option<usize>,
}

async fn list_reports(State(app): Shared, Query(q): Query<ReportsQuery>) -> Response {
    app.read(|m| {
        let all = &m.registry().reports;
        let from = q.latest.map_or(0, |n| all.len().saturating_sub(n));
        Json(&all[from..]).into_response()
    })
}

async fn get_report(State(app): Shared, Path(id): Path<String>) -> ApiResult<Response> {
    app.read(|m| {
        let r = m.registry();
        let found = if id == "latest" { r.reports.last() } else { r.report(&id) };
        found
            .map(|r| Json(r).into_response())
            .ok_or_else(|| ApiError::not_found(format!("unknown drift report {id}")))
    })
}

async fn post_experiment(State(app): Shared, body: Bytes) -> ApiResult<Response> {
    let request: ExperimentRequest = parse_json(&body)?;
    let status = blocking(move || app.spawn_experiment(request)).await?;
    Ok((StatusCode::ACCEPTED, Json(status)).into_response())
}

async fn list_experiments(State(app): Shared) -> Json<Value> {
    let jobs = lock(&app.jobs).experiments.clone();
    app.read(|m| {
        let mut out: BTreeMap<String, Value> = BTreeMap::new();
        for (id, s) in jobs {
            out.insert(id, json!({ "id": s.id, "state": s.state, "error": s.error }));
        }
        for (id, r) in &m.registry().experiments {
            out.insert(
                id.clone(),
                json!({
                    "id": id,
                    "state": JobState::Succeeded,
                    "train_window": r.train_window,
                    "test_windows": r.test_windows,
                }),
            );
        }
        Json(json!(out.into_values().collect::<Vec<_>>()))
    })
}

async fn get_experiment(State(app): Shared, Path(id): Path<String>) -> ApiResult<Response> {
    if let Some(resp) = app.read(|m| m.registry().experiments.get(&id).map(|r| Json(r).into_response())) {
        return Ok(resp);
    }
    match lock(&app.jobs).experiments.get(&id) {
        Some(s) if s.state == JobState::Failed => Ok((StatusCode::UNPROCESSABLE_ENTITY, Json(s)).into_response()),
        Some(s) => Ok((StatusCode::ACCEPTED, Json(s)).into_response()),
        None => Err(ApiError::not_found(format!("unknown experiment {id}"))),
    }
}

#[derive(Debug, Serialize)]
struct ModelEntry<'a> {
    version_id: &'a str,
    family: lm_core::Family,
    kind: &'static str,
    members: usize,
    role: &'static str,
    train_window: &'a str,
    trained_at_step: u64,
    hyperparams: &'a lm_core::Hyperparams,
    metrics_at_train: &'a lm_core::Metrics,
}

async fn list_models(State(app): Shared) -> Json<Value> {
    app.read(|m| {
        let s = m.state();
        let entries: Vec<ModelEntry> = m
            .registry()
            .models
            .values()
            .map(|model| {
                let id = model.version_id();
                let p = model.primary();
                ModelEntry {
                    version_id: id,
                    family: model.family(),
                    kind: match model {
                        ServedModel::Single(_) => "single",
                        ServedModel::Ensemble(_) => "ensemble",
                    },
                    members: match model {
                        ServedModel::Single(_) => 1,
                        ServedModel::Ensemble(e) => e.members.len(),
                    },
                    role: if s.champion.as_deref() == Some(id) {
                        "champion"
                    } else if s.challengers.iter().any(|c| c == id) {
                        "challenger"
                    } else {
                        "retired"
                    },
                    train_window: &p.train_window,
                    trained_at_step: p.trained_at_step,
                    hyperparams: &p.hyperparams,
                    metrics_at_train: &p.metrics_at_train,
                }
            })
            .collect();
        Json(json!(entries))
    })
}

async fn get_model(State(app): Shared, Path(id): Path<String>) -> ApiResult<Response> {
    app.read(|m| {
        m.registry()
            .models
            .get(&id)
            .map(|model| Json(model).into_response())
            .ok_or_else(|| ApiError::not_found(format!("unknown model {id}")))
    })
}

async fn model_evidence(State(app): Shared) -> Json<BTreeMap<String, Option<PromotionEvidence>>> {
    app.read(|m| {
        Json(
            m.state()
                .challengers
                .iter()
                .map(|c| (c.clone(), m.promotion_evidence(c)))
                .collect(),
        )
    })
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PromoteRequest {
    version_id: String,
}

async fn promote(State(app): Shared, body: Bytes) -> ApiResult<Response> {
    let req: PromoteRequest = parse_json(&body)?;
    let payload = blocking(move || {
        app.write(|m| {
            if !m.registry().models.contains_key(&req.version_id) {
                return Err(ApiError::not_found(format!("unknown model {}", req.version_id)));
            }
            m.promote(&req.version_id).map_err(ApiError::from)
        })
    })
    .await?;
    Ok(Json(payload).into_response())
}

async fn dismiss(State(app): Shared) -> ApiResult<Json<Value>> {
    let ids = blocking(move || app.write(|m| m.dismiss_challengers().map_err(ApiError::from))).await?;
    Ok(Json(json!({ "dismissed": ids })))
}

async fn start_retrain(State(app): Shared) -> ApiResult<Response> {
    let status = blocking(move || app.spawn_retrain()).await?;
    Ok((StatusCode::ACCEPTED, Json(status)).into_response())
}

async fn retrain_status(State(app): Shared) -> Json<RetrainStatus> {
    Json(app.retrain_status())
}

async fn rolling_metrics(State(app): Shared) -> Response {
    app.read(|m| Json(m.rolling_metrics()).into_response())
}

async fn window_progress(State(app): Shared) -> Response {
    app.read(|m| Json(m.window_progress()).into_response())
}

async fn state(State(app): Shared) -> Response {
    app.read(|m| Json(m.state()).into_response())
}

#[derive(Debug, Deserialize)]
struct EventsQuery {
    /// First event index to return, counting from 1.
    from: Option<u64>,
    limit: Option<usize>,
}

async fn events(State(app): Shared, Query(q): Query<EventsQuery>) -> Response {
    app.read(|m| {
        let events = m.events();
        let start = (q.from.unwrap_or(1).max(1) - 1).min(events.len() as u64) as usize;
        let end = start.saturating_add(q.limit.unwrap_or(1000)).min(events.len());
        Json(&events[start..end]).into_response()
    })
}

const UI_PLACEHOLDER: &str = "<!doctype html><html><head><meta charset=\"utf-8\"><title>lm</title></head>\
<body><h1>lm</h1><p>No dashboard is configured. Set <code>ui_dir</code> in the service config to serve one here.</p>\
<p>The JSON API is documented in <code>docs/api.md</code>; try <a href=\"/health\">/health</a> or \
<a href=\"/state\">/state</a>.</p></body></html>";

async fn ui_placeholder() -> Html<&'static str> {
    Html(UI_PLACEHOLDER)
}

pub fn router(app: Arc<App>) -> Router {
    let ui_dir = app.ui_dir.clone();
    let router = Router::new()
        .route("/health", get(health))
        .route("/predict", post(predict))
        .route("/outcomes", post(post_outcome))
        .route("/datasets", get(list_datasets))
        .route("/datasets/batch", post(ingest_batch))
        .route("/datasets/reference", post(designate_reference))
        .route("/datasets/stats", get(dataset_stats))
        .route("/datasets/window", get(window_progress))
        .route("/drift/reports", get(list_reports))
        .route("/drift/reports/{id}", get(get_report))
        .route("/experiments", get(list_experiments).post(post_experiment))
        .route("/experiments/{id}", get(get_experiment))
        .route("/models", get(list_models))
        .route("/models/evidence", get(model_evidence))
        .route("/models/promote", post(promote))
        .route("/models/dismiss", post(dismiss))
        .route("/models/retrain", get(retrain_status).post(start_retrain))
        .route("/models/{id}", get(get_model))
        .route("/metrics/rolling", get(rolling_metrics))
        .route("/state", get(state))
        .route("/events", get(events));
    let router = match ui_dir {
        Some(dir) => router.nest_service("/ui", tower_http::services::ServeDir::new(dir)),
        None => router.route("/ui", get(ui_placeholder)),
    };
    router.with_state(app)
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = term => {},
    }
}

/// Binds, recovers the data directory, and serves until SIGINT or SIGTERM.
/// Prints `listening on <addr>` once requests are accepted.
pub async fn serve(config: ServiceConfig) -> Result<(), ServiceError> {
    let listener = tokio::net::TcpListener::bind(&config.bind).await.map_err(|source| ServiceError::Io {
        context: format!("binding {}", config.bind),
        source,
    })?;
    let addr: SocketAddr = listener.local_addr().map_err(|source| ServiceError::Io {
        context: "reading the bound address".into(),
        source,
    })?;
    let app = tokio::task::spawn_blocking(move || App::open(&config))
        .await
        .map_err(|e| ServiceError::Bootstrap(e.to_string()))??;
    let app = Arc::new(app);
    app.resume();
    println!("listening on {addr}");
    axum::serve(listener, router(app))
        .with_graceful_shutdown(shutdown_signal())
        .await
        .map_err(|source| ServiceError::Io {
            context: "serving".into(),
            source,
        })
}
