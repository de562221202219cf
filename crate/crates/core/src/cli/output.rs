//! Run manifests and the CSV files that reference them.
//!
//! Every CSV starts with a `manifest_id` column holding the id of the
//! manifest written next to it. Numbers are printed with `.` as decimal
//! separator and no exponent; rows end with `\n`.
//!
//! `<name>.summary.csv`, one row per run:
//!
//! | column | meaning |
//! |---|---|
//! | `run` | run index, 0-based |
//! | `seed` | per-run seed derived from the master seed |
//! | `final_regret` | cumulative expected regret after the last round |
//! | `target_coverage` | fraction of rounds listing every target (empty without targets) |
//! | `manipulated_rounds` | rounds whose feedback the adversary dictated |
//! | `success` | 1 if coverage reached the success fraction, 0 if not, empty without targets |
//! | `rec_1` .. `rec_L` | times each item was recommended |
//!
//! `<name>.curve.csv`, one row per grid round: `round`, `mean_regret`,
//! `std_regret` (cumulative regret across runs; sample standard deviation).
//!
//! `<name>.csv` from `sweep`, one row per horizon: `horizon`, `t1`, `t2`
//! (empty for attacks without phases), `manipulated_rounds` (mean over runs),
//! `mean_final_regret`, `std_final_regret`, `runs`.

use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::attacks::{Attack, PBM_REPORTED_T1_T2};
use crate::error::{Error, Result};
use crate::harness::{ExperimentConfig, Summary};
use crate::rng::RNG_ALGORITHM;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub id: String,
    pub command: String,
    pub version: String,
    pub rng: String,
    pub master_seed: u64,
    pub config: ExperimentConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizons: Option<Vec<u64>>,
    /// Schedule per horizon for `sweep`, a single entry for `run`.
    pub schedules: Vec<Value>,
    pub started_unix: u64,
    pub finished_unix: u64,
}

pub fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

impl RunManifest {
    pub fn new(command: &str, config: &ExperimentConfig, horizons: Option<Vec<u64>>, schedules: Vec<Value>) -> Self {
        let mut manifest = Self {
            id: String::new(),
            command: command.to_string(),
            version: VERSION.to_string(),
            rng: RNG_ALGORITHM.to_string(),
            master_seed: config.master_seed,
            config: config.clone(),
            horizons,
            schedules,
            started_unix: unix_now(),
            finished_unix: 0,
        };
        manifest.id = manifest.content_id();
        manifest
    }

    /// First 16 hex digits of SHA-256 over everything except the timestamps.
    fn content_id(&self) -> String {
        let identity = json!({
            "command": self.command,
            "version": self.version,
            "rng": self.rng,
            "config": self.config,
            "horizons": self.horizons,
        });
        let digest = Sha256::digest(identity.to_string().as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn write(&mut self, path: &Path) -> Result<()> {
        self.finished_unix = unix_now();
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

/// Schedule values of an attack as a JSON object; `null` without an attack.
pub fn schedule_record(attack: &Attack) -> Value {
    match attack {
        Attack::None => Value::Null,
        Attack::CascadeOfa { schedule, .. } => json!({
            "attack": attack.name(),
            "horizon": schedule.horizon,
            "w_m": schedule.w_m,
            "t1": schedule.t1,
            "t2": schedule.t2,
            "budget": schedule.budget(),
        }),
        Attack::PbmOfa { schedule, .. } => json!({
            "attack": attack.name(),
            "horizon": schedule.horizon,
            "w_m": schedule.w_m,
            "lambda_p": schedule.lambda_p,
            "eta": schedule.eta,
            "rho": schedule.rho,
            "gamma": schedule.gamma,
            "t1": schedule.t1,
            "t2": schedule.t2,
            "budget": schedule.budget(),
            "reported_t1": PBM_REPORTED_T1_T2.0,
            "reported_t2": PBM_REPORTED_T1_T2.1,
        }),
        Attack::CascadeAtq { budget, .. } | Attack::PbmAtq { budget, .. } => json!({
            "attack": attack.name(),
            "budget": budget,
        }),
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(file))
}

fn finish(mut w: csv::Writer<fs::File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_summary_csv(path: &Path, manifest_id: &str, summary: &Summary, num_items: usize) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut header: Vec<String> = [
        "manifest_id",
        "run",
        "seed",
        "final_regret",
        "target_coverage",
        "manipulated_rounds",
        "success",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend((1..=num_items).map(|i| format!("rec_{i}")));
    w.write_record(&header)?;
    for run in &summary.runs {
        let mut row = vec![
            manifest_id.to_string(),
            run.run_index.to_string(),
            run.seed.to_string(),
            run.final_regret.to_string(),
            run.target_coverage.map(|c| c.to_string()).unwrap_or_default(),
            run.manipulated_rounds.to_string(),
            run.target_coverage
                .map(|_| (run.is_success() as u8).to_string())
                .unwrap_or_default(),
        ];
        row.extend(run.rec_counts.iter().map(u64::to_string));
        w.write_record(&row)?;
    }
    finish(w, path)
}

pub fn write_curve_csv(path: &Path, manifest_id: &str, summary: &Summary) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["manifest_id", "round", "mean_regret", "std_regret"])?;
    for p in &summary.curve {
        w.write_record([
            manifest_id.to_string(),
            p.round.to_string(),
            p.mean.to_string(),
            p.std.to_string(),
        ])?;
    }
    finish(w, path)
}

/// One sweep row.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub horizon: u64,
    pub t1: Option<u64>,
    pub t2: Option<u64>,
    pub manipulated_rounds: f64,
    pub mean_final_regret: f64,
    pub std_final_regret: f64,
    pub runs: usize,
}

impl SweepRow {
    pub fn new(horizon: u64, attack: &Attack, summary: &Summary) -> Self {
        let (t1, t2) = match attack {
            Attack::CascadeOfa { schedule, .. } => (Some(schedule.t1), Some(schedule.t2)),
            Attack::PbmOfa { schedule, .. } => (Some(schedule.t1), Some(schedule.t2)),
            _ => (None, None),
        };
        let manipulated: Vec<f64> = summary.runs.iter().map(|r| r.manipulated_rounds as f64).collect();
        Self {
            horizon,
            t1,
            t2,
            manipulated_rounds: crate::harness::mean_std(&manipulated).0,
            mean_final_regret: summary.mean_final_regret,
            std_final_regret: summary.std_final_regret,
            runs: summary.runs.len(),
        }
    }
}

pub fn write_sweep_csv(path: &Path, manifest_id: &str, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record([
        "manifest_id",
        "horizon",
        "t1",
        "t2",
        "manipulated_rounds",
        "mean_final_regret",
        "std_final_regret",
        "runs",
    ])?;
    let opt = |v: Option<u64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        w.write_record([
            manifest_id.to_string(),
            r.horizon.to_string(),
            opt(r.t1),
            opt(r.t2),
            r.manipulated_rounds.to_string(),
            r.mean_final_regret.to_string(),
            r.std_final_regret.to_string(),
            r.runs.to_string(),
        ])?;
    }
    finish(w, path)
}
