//! Per-episode records, run summaries and their CSV files.

use std::fs::{self, File};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::HarnessError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// The optimiser is wired in and may be triggered.
    GaActivated,
    /// Same run with triggering switched off.
    Baseline,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::GaActivated => "ga_activated",
            Variant::Baseline => "baseline",
        }
    }
}

/// One row of `metrics.csv`: one agent, one episode. Episodes count from 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub variant: Variant,
    pub run_seed: u64,
    pub episode: u64,
    pub agent_id: u32,
    #[serde(rename = "return")]
    pub ret: f64,
    pub epsilon: f64,
    /// Mean per-step action-selection latency.
    pub drl_action_time_ms: f64,
    /// An optimisation request was outstanding while this episode ran.
    pub ne_active: bool,
    /// Optimiser wall time of the job whose response landed after this episode.
    pub ne_job_ms: Option<f64>,
    pub ga_triggered: bool,
    pub deployed: bool,
    /// Digest of the agent's parameters as the episode started.
    pub param_digest: String,
}

impl MetricsRecord {
    /// The record with wall-clock fields blanked, for replay comparisons.
    pub fn without_timing(&self) -> Self {
        Self {
            drl_action_time_ms: 0.0,
            ne_job_ms: self.ne_job_ms.map(|_| 0.0),
            ..self.clone()
        }
    }
}

pub const METRICS_HEADER: &[&str] = &[
    "variant",
    "run_seed",
    "episode",
    "agent_id",
    "return",
    "epsilon",
    "drl_action_time_ms",
    "ne_active",
    "ne_job_ms",
    "ga_triggered",
    "deployed",
    "param_digest",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub variant: Variant,
    pub run_seed: u64,
    pub agent_id: u32,
    pub episodes: u64,
    pub episodes_to_target: Option<u64>,
    pub final_window_avg: f64,
    pub stalled: bool,
    pub total_ne_jobs: u64,
    pub total_ne_wall_ms: f64,
}

pub const SUMMARY_HEADER: &[&str] = &[
    "variant",
    "run_seed",
    "agent_id",
    "episodes",
    "episodes_to_target",
    "final_window_avg",
    "stalled",
    "total_ne_jobs",
    "total_ne_wall_ms",
];

/// Windows that must pass without a new best before a run counts as stalled.
pub const STALL_WINDOWS: usize = 3;

/// A window average must beat the earlier best by more than this fraction
/// of the target to count as an improvement. Twelve-episode window means on
/// a plateau wander by a few percent of the target from noise alone.
pub const STALL_TOLERANCE: f64 = 0.05;

/// Trailing `window`-episode mean after each episode; `None` until full.
pub fn trailing_averages(returns: &[f64], window: usize) -> Vec<Option<f64>> {
    let mut out = Vec::with_capacity(returns.len());
    let mut sum = 0.0;
    for (i, r) in returns.iter().enumerate() {
        sum += r;
        if i >= window {
            sum -= returns[i - window];
        }
        out.push((i + 1 >= window).then(|| sum / window as f64));
    }
    out
}

/// Summary of one agent's returns in episode order.
///
/// `stalled` holds when the final window is below target and none of the
/// last [`STALL_WINDOWS`] aligned windows beat every earlier window by more
/// than [`STALL_TOLERANCE`] of the target. With too few windows to compare,
/// the first window is the reference.
pub fn summarize_returns(returns: &[f64], ne_interval: usize, target: f64) -> (Option<u64>, f64, bool) {
    assert!(!returns.is_empty(), "summary of an empty run");
    assert!(ne_interval >= 1);
    let episodes_to_target = trailing_averages(returns, ne_interval)
        .iter()
        .position(|a| a.is_some_and(|a| a >= target))
        .map(|i| i as u64 + 1);
    let tail = &returns[returns.len().saturating_sub(ne_interval)..];
    let final_avg = tail.iter().sum::<f64>() / tail.len() as f64;

    let windows: Vec<f64> = returns
        .chunks_exact(ne_interval)
        .map(|c| c.iter().sum::<f64>() / ne_interval as f64)
        .collect();
    let improved = if windows.len() <= 1 {
        false
    } else {
        let split = windows.len().saturating_sub(STALL_WINDOWS).max(1);
        let earlier = windows[..split].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        windows[split..]
            .iter()
            .any(|&w| w > earlier + STALL_TOLERANCE * target)
    };
    (episodes_to_target, final_avg, final_avg < target && !improved)
}

fn io_err(path: &Path, e: impl ToString) -> HarnessError {
    HarnessError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn writer(path: &Path, header: &[&str]) -> Result<csv::Writer<File>, HarnessError> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| io_err(path, e))?;
    w.write_record(header).map_err(|e| io_err(path, e))?;
    Ok(w)
}

fn write_rows<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<(), HarnessError> {
    let mut w = writer(path, header)?;
    for r in rows {
        w.serialize(r).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub const CURVE_HEADER: &[&str] = &["run_seed", "episode", "agent_id", "ga_activated", "baseline"];

#[derive(Serialize)]
struct CurveRow {
    run_seed: u64,
    episode: u64,
    agent_id: u32,
    ga_activated: Option<f64>,
    baseline: Option<f64>,
}

/// Trailing-window averages with both variants side by side; a variant
/// that was not run leaves its column empty.
fn reward_curve(metrics: &[MetricsRecord], ne_interval: usize) -> Vec<CurveRow> {
    use std::collections::BTreeMap;
    let mut series: BTreeMap<(u64, u32, Variant), Vec<(u64, f64)>> = BTreeMap::new();
    for m in metrics {
        series
            .entry((m.run_seed, m.agent_id, m.variant))
            .or_default()
            .push((m.episode, m.ret));
    }
    let mut rows: BTreeMap<(u64, u64, u32), CurveRow> = BTreeMap::new();
    for ((seed, agent, variant), mut points) in series {
        points.sort_by_key(|p| p.0);
        let returns: Vec<f64> = points.iter().map(|p| p.1).collect();
        for ((episode, _), avg) in points.iter().zip(trailing_averages(&returns, ne_interval)) {
            let row = rows.entry((seed, *episode, agent)).or_insert(CurveRow {
                run_seed: seed,
                episode: *episode,
                agent_id: agent,
                ga_activated: None,
                baseline: None,
            });
            match variant {
                Variant::GaActivated => row.ga_activated = avg,
                Variant::Baseline => row.baseline = avg,
            }
        }
    }
    rows.into_values().collect()
}

/// Writes `metrics.csv`, `summary.csv` and `reward_curve.csv` under `out_dir`.
pub fn write_outputs(
    metrics: &[MetricsRecord],
    summaries: &[RunSummary],
    ne_interval: usize,
    out_dir: &Path,
) -> Result<(), HarnessError> {
    fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;
    write_rows(&out_dir.join("metrics.csv"), METRICS_HEADER, metrics)?;
    write_rows(&out_dir.join("summary.csv"), SUMMARY_HEADER, summaries)?;
    write_rows(&out_dir.join("reward_curve.csv"), CURVE_HEADER, &reward_curve(metrics, ne_interval))
}

/// Writes any serialisable rows with their own field names as header.
pub fn write_table<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<(), HarnessError> {
    write_rows(path, header, rows)
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRecord>, HarnessError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| io_err(path, e))?;
    r.deserialize()
        .collect::<Result<Vec<MetricsRecord>, _>>()
        .map_err(|e| io_err(path, e))
}
