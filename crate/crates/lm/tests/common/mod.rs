#![allow(dead_code)]

use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Child, Command, Stdio};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use lm::config::{Bootstrap, ServiceConfig};
use lm::service::{router, App};
use lm_core::data::{PatientRecord, SyntheticConfig, YearRange};
use lm_core::lifecycle::{MachineConfig, RetrainPolicy};
use lm_core::Family;
use serde_json::Value;

pub const BIN: &str = env!("CARGO_BIN_EXE_lm");

/// An in-process server on an ephemeral port, stopped on drop.
pub struct Server {
    pub base: String,
    stop: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<JoinHandle<()>>,
    agent: ureq::Agent,
}

impl Server {
    pub fn start(config: ServiceConfig) -> Server {
        let (addr_tx, addr_rx) = std::sync::mpsc::channel();
        let (stop_tx, stop_rx) = tokio::sync::oneshot::channel::<()>();
        let thread = std::thread::spawn(move || {
            let rt = tokio::runtime::Builder::new_multi_thread()
                .worker_threads(2)
                .enable_all()
                .build()
                .unwrap();
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
                let addr = listener.local_addr().unwrap();
                let app = Arc::new(App::open(&config).unwrap());
                addr_tx.send(addr).unwrap();
                axum::serve(listener, router(app))
                    .with_graceful_shutdown(async {
                        let _ = stop_rx.await;
                    })
                    .await
                    .unwrap();
            });
        });
        let addr = addr_rx.recv().expect("server started");
        Server {
            base: format!("http://{addr}"),
            stop: Some(stop_tx),
            thread: Some(thread),
            agent: agent(),
        }
    }

    pub fn get(&self, path: &str) -> (u16, String) {
        get(&self.agent, &format!("{}{path}", self.base))
    }

    pub fn get_json(&self, path: &str) -> Value {
        let (status, body) = self.get(path);
        assert_eq!(status, 200, "GET {path}: {body}");
        serde_json::from_str(&body).unwrap()
    }

    pub fn post(&self, path: &str, content_type: &str, body: &str) -> (u16, String) {
        post(&self.agent, &format!("{}{path}", self.base), content_type, body)
    }

    pub fn post_json(&self, path: &str, body: &Value) -> (u16, Value) {
        let (status, text) = self.post(path, "application/json", &body.to_string());
        (status, serde_json::from_str(&text).unwrap_or(Value::Null))
    }

    pub fn event_count(&self) -> u64 {
        self.get_json("/health")["events"].as_u64().unwrap()
    }

    /// Polls `path` until it answers 200.
    pub fn wait_for(&self, path: &str, timeout: Duration) -> Value {
        let start = Instant::now();
        loop {
            let (status, body) = self.get(path);
            if status == 200 {
                return serde_json::from_str(&body).unwrap();
            }
            assert!(status == 202, "GET {path}: {status} {body}");
            assert!(start.elapsed() < timeout, "timed out waiting for {path}");
            std::thread::sleep(Duration::from_millis(50));
        }
    }

    pub fn wait_retrain(&self, timeout: Duration) -> Value {
        let start = Instant::now();
        loop {
            let s = self.get_json("/models/retrain");
            if s["state"] != "running" {
                return s;
            }
            assert!(start.elapsed() < timeout, "retrain did not finish");
            std::thread::sleep(Duration::from_millis(50));
        }
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        if let Some(s) = self.stop.take() {
            let _ = s.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

pub fn agent() -> ureq::Agent {
    ureq::Agent::config_builder()
        .http_status_as_error(false)
        .timeout_global(Some(Duration::from_secs(120)))
        .build()
        .into()
}

pub fn get(agent: &ureq::Agent, url: &str) -> (u16, String) {
    let mut resp = agent.get(url).call().unwrap_or_else(|e| panic!("GET {url}: {e}"));
    let status = resp.status().as_u16();
    (status, resp.body_mut().read_to_string().unwrap())
}

pub fn post(agent: &ureq::Agent, url: &str, content_type: &str, body: &str) -> (u16, String) {
    let mut resp = agent
        .post(url)
        .header("content-type", content_type)
        .send(body)
        .unwrap_or_else(|e| panic!("POST {url}: {e}"));
    let status = resp.status().as_u16();
    (status, resp.body_mut().read_to_string().unwrap())
}

/// A small null-drift cohort: four years of 250 patients, the first two
/// years ingested as the reference at first start.
pub fn cohort(seed: u64) -> SyntheticConfig {
    let mut c = SyntheticConfig::null_drift();
    c.years = 4;
    c.patients_per_year = 250;
    c.seed = seed;
    c
}

pub fn small_config(dir: &Path, seed: u64) -> ServiceConfig {
    ServiceConfig {
        data_dir: dir.to_path_buf(),
        policy: RetrainPolicy {
            window_size: 100,
            min_outcomes: 30,
            ..RetrainPolicy::default()
        },
        machine: MachineConfig {
            ensemble_size: 3,
            families: Family::ALL.to_vec(),
            budget_per_family: 2,
            seed,
        },
        bootstrap: Some(Bootstrap {
            synthetic: Some(cohort(seed)),
            csv: None,
            reference_years: Some(YearRange { start: 1982, end: 1983 }),
        }),
        auto_retrain: false,
        ..ServiceConfig::default()
    }
}

pub fn without_outcome(r: &PatientRecord) -> Value {
    let mut v = serde_json::to_value(r).unwrap();
    v["outcome"] = Value::Null;
    v
}

/// All-pairs concordance with ties counted one half.
pub fn pairwise_auc(scores: &[f64], labels: &[bool]) -> Option<f64> {
    let mut twice = 0u64;
    let mut pairs = 0u64;
    for i in 0..scores.len() {
        for j in 0..scores.len() {
            if labels[i] && !labels[j] {
                pairs += 1;
                twice += match scores[i].partial_cmp(&scores[j]).unwrap() {
                    std::cmp::Ordering::Greater => 2,
                    std::cmp::Ordering::Equal => 1,
                    std::cmp::Ordering::Less => 0,
                };
            }
        }
    }
    (pairs > 0).then(|| twice as f64 / (2 * pairs) as f64)
}

/// A spawned `lm serve` process.
pub struct Running {
    pub child: Child,
    pub base: String,
}

/// Starts `lm serve` and waits for its listening line.
pub fn start_binary(config: &Path) -> Running {
    let mut child = Command::new(BIN)
        .args(["serve", "--config", config.to_str().unwrap()])
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let addr = line.trim().strip_prefix("listening on ").unwrap_or_else(|| panic!("unexpected output {line:?}"));
    Running {
        base: format!("http://{addr}"),
        child,
    }
}

pub fn terminate(mut r: Running) {
    Command::new("kill").args(["-TERM", &r.child.id().to_string()]).status().unwrap();
    let status = r.child.wait().unwrap();
    assert!(status.success(), "{status}");
}
