//! CSV/JSON export of simulation records and plot tables.
//!
//! Record CSV columns, in order:
//!
//! | column | meaning |
//! |---|---|
//! | index | task number from 0 |
//! | release_ms | release time |
//! | gamma_at_release_mbps | rate the planner saw |
//! | mode | `local` or `offload` |
//! | method | `stae` or `deepisc` |
//! | alpha_k, beta_m_percent, entropy_on | chosen budgets |
//! | feasible | predicted completion within the deadline |
//! | interpolated_accuracy | accuracy interpolated between tabulated budgets |
//! | predicted_completion_ms, predicted_accuracy_pct | planner estimates |
//! | raw_bytes, size_bits | uncoded payload and bits on the wire |
//! | comm_ms, device_compute_ms, server_compute_ms | estimate components |
//! | tx_start_ms, tx_end_ms | transfer interval on the trace |
//! | actual_completion_ms | release to result |
//! | met_deadline | actual completion within the deadline |
//! | expected_accuracy_pct | accuracy credited to the task |

use serde::{Deserialize, Serialize};

use super::{SimError, SimulationResult, TaskRecord};
use crate::baselines::{evaluate_baseline, evaluate_fixed, full_offload};
use crate::budget::{BudgetPair, SpatialBudget};
use crate::latency::LinkModel;
use crate::planner::{enumerate_options, Mode, PlanDecision, PlannerOptions};
use crate::profile::{DeploymentProfile, Method};
use crate::tensor::ClipDims;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
}

pub const RECORD_COLUMNS: [&str; 23] = [
    "index",
    "release_ms",
    "gamma_at_release_mbps",
    "mode",
    "method",
    "alpha_k",
    "beta_m_percent",
    "entropy_on",
    "feasible",
    "interpolated_accuracy",
    "predicted_completion_ms",
    "predicted_accuracy_pct",
    "raw_bytes",
    "size_bits",
    "comm_ms",
    "device_compute_ms",
    "server_compute_ms",
    "tx_start_ms",
    "tx_end_ms",
    "actual_completion_ms",
    "met_deadline",
    "expected_accuracy_pct",
    "release_gap_ms",
];

#[derive(Debug, Serialize, Deserialize)]
struct RecordRow {
    index: usize,
    release_ms: f64,
    gamma_at_release_mbps: f64,
    mode: Mode,
    method: Method,
    alpha_k: usize,
    beta_m_percent: f64,
    entropy_on: bool,
    feasible: bool,
    interpolated_accuracy: bool,
    predicted_completion_ms: f64,
    predicted_accuracy_pct: f64,
    raw_bytes: u64,
    size_bits: f64,
    comm_ms: f64,
    device_compute_ms: f64,
    server_compute_ms: f64,
    tx_start_ms: f64,
    tx_end_ms: f64,
    actual_completion_ms: f64,
    met_deadline: bool,
    expected_accuracy_pct: f64,
    /// Time since the previous release; 0 for the first task.
    release_gap_ms: f64,
}

impl RecordRow {
    fn new(r: &TaskRecord, prev_release: Option<f64>) -> Self {
        let d = &r.decision;
        Self {
            index: r.index,
            release_ms: r.release_ms,
            gamma_at_release_mbps: r.gamma_at_release_mbps,
            mode: d.mode,
            method: d.method,
            alpha_k: d.alpha_k,
            beta_m_percent: d.beta_m.percent(),
            entropy_on: d.entropy_on,
            feasible: d.feasible,
            interpolated_accuracy: d.interpolated_accuracy,
            predicted_completion_ms: d.predicted_completion_ms,
            predicted_accuracy_pct: d.predicted_accuracy_pct,
            raw_bytes: d.raw_bytes,
            size_bits: d.size_bits,
            comm_ms: d.comm_ms,
            device_compute_ms: d.device_compute_ms,
            server_compute_ms: d.server_compute_ms,
            tx_start_ms: r.tx_start_ms,
            tx_end_ms: r.tx_end_ms,
            actual_completion_ms: r.actual_completion_ms,
            met_deadline: r.met_deadline,
            expected_accuracy_pct: r.expected_accuracy_pct,
            release_gap_ms: prev_release.map_or(0.0, |p| r.release_ms - p),
        }
    }

    fn into_record(self) -> Result<TaskRecord, SimError> {
        let beta_m = SpatialBudget::from_percent(self.beta_m_percent).ok_or_else(|| {
            SimError::Report(format!("beta_m_percent {} out of range", self.beta_m_percent))
        })?;
        Ok(TaskRecord {
            index: self.index,
            release_ms: self.release_ms,
            gamma_at_release_mbps: self.gamma_at_release_mbps,
            decision: PlanDecision {
                mode: self.mode,
                method: self.method,
                alpha_k: self.alpha_k,
                beta_m,
                entropy_on: self.entropy_on,
                predicted_completion_ms: self.predicted_completion_ms,
                predicted_accuracy_pct: self.predicted_accuracy_pct,
                feasible: self.feasible,
                interpolated_accuracy: self.interpolated_accuracy,
                raw_bytes: self.raw_bytes,
                size_bits: self.size_bits,
                comm_ms: self.comm_ms,
                device_compute_ms: self.device_compute_ms,
                server_compute_ms: self.server_compute_ms,
            },
            tx_start_ms: self.tx_start_ms,
            tx_end_ms: self.tx_end_ms,
            actual_completion_ms: self.actual_completion_ms,
            met_deadline: self.met_deadline,
            expected_accuracy_pct: self.expected_accuracy_pct,
        })
    }
}

fn csv_string<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Result<String, SimError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(|e| SimError::Report(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| SimError::Report(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| SimError::Report(e.to_string()))
}

/// CSV holds the records only; JSON holds the summary and the records.
pub fn export_records(result: &SimulationResult, format: ReportFormat) -> Result<Vec<u8>, SimError> {
    if result.records.is_empty() {
        return Err(SimError::Report("no records to export".into()));
    }
    match format {
        ReportFormat::Csv => {
            let prev = std::iter::once(None).chain(result.records.iter().map(|r| Some(r.release_ms)));
            csv_string(
                result
                    .records
                    .iter()
                    .zip(prev)
                    .map(|(r, p)| RecordRow::new(r, p)),
            )
            .map(String::into_bytes)
        }
        ReportFormat::Json => {
            let mut v = serde_json::to_vec_pretty(result).map_err(|e| SimError::Report(e.to_string()))?;
            v.push(b'\n');
            Ok(v)
        }
    }
}

pub fn parse_records_csv(bytes: &[u8]) -> Result<Vec<TaskRecord>, SimError> {
    let mut rdr = csv::Reader::from_reader(bytes);
    let headers = rdr.headers().map_err(|e| SimError::Report(e.to_string()))?;
    if headers.iter().collect::<Vec<_>>() != RECORD_COLUMNS {
        return Err(SimError::Report("unexpected record columns".into()));
    }
    rdr.deserialize::<RecordRow>()
        .map(|row| {
            row.map_err(|e| SimError::Report(e.to_string()))?
                .into_record()
        })
        .collect()
}

/// One offload option at a fixed rate and deadline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrontierRow {
    pub mode: Mode,
    pub alpha_k: usize,
    pub beta_m_percent: f64,
    pub entropy_on: bool,
    pub completion_ms: f64,
    pub accuracy_pct: f64,
    pub feasible: bool,
    pub interpolated: bool,
    /// No other option is both faster and at least as accurate.
    pub pareto: bool,
}

/// Every option sorted by completion time, with Pareto membership.
pub fn frontier(
    link: &LinkModel,
    delta_ms: f64,
    profile: &DeploymentProfile,
    opts: &PlannerOptions,
) -> Result<Vec<FrontierRow>, SimError> {
    let mut options = enumerate_options(link, delta_ms, profile, opts)?;
    options.sort_by(|a, b| {
        a.predicted_completion_ms
            .total_cmp(&b.predicted_completion_ms)
            .then(b.predicted_accuracy_pct.total_cmp(&a.predicted_accuracy_pct))
            .then(a.alpha_k.cmp(&b.alpha_k))
            .then(a.beta_m.cmp(&b.beta_m))
            .then(a.entropy_on.cmp(&b.entropy_on))
    });
    let mut best = f64::NEG_INFINITY;
    Ok(options
        .iter()
        .map(|o| {
            let pareto = o.predicted_accuracy_pct > best;
            best = best.max(o.predicted_accuracy_pct);
            FrontierRow {
                mode: o.mode,
                alpha_k: o.alpha_k,
                beta_m_percent: o.beta_m.percent(),
                entropy_on: o.entropy_on,
                completion_ms: o.predicted_completion_ms,
                accuracy_pct: o.predicted_accuracy_pct,
                feasible: o.feasible,
                interpolated: o.interpolated_accuracy,
                pareto,
            }
        })
        .collect())
}

pub fn frontier_csv(rows: &[FrontierRow]) -> Result<String, SimError> {
    csv_string(rows)
}

/// Completion time of each approach at one budget pair across rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateSweepRow {
    pub gamma_mbps: f64,
    pub stae_ms: f64,
    pub stae_entropy_on: bool,
    pub deepisc_ms: Option<f64>,
    pub deepisc_entropy_on: Option<bool>,
    pub full_offload_ms: f64,
    pub local_ms: f64,
}

pub fn rate_sweep(
    rates_mbps: &[f64],
    pair: BudgetPair,
    profile: &DeploymentProfile,
    dims: ClipDims,
) -> Result<Vec<RateSweepRow>, SimError> {
    rates_mbps
        .iter()
        .map(|&g| {
            let link = LinkModel::new(g)?;
            let stae = evaluate_fixed(Method::Stae, pair, &link, f64::INFINITY, profile, dims)?;
            let deepisc = evaluate_baseline(pair, &link, f64::INFINITY, profile, dims).ok();
            let full = full_offload(&link, f64::INFINITY, profile, dims)?;
            Ok(RateSweepRow {
                gamma_mbps: g,
                stae_ms: stae.predicted_completion_ms,
                stae_entropy_on: stae.entropy_on,
                deepisc_ms: deepisc.map(|d| d.predicted_completion_ms),
                deepisc_entropy_on: deepisc.map(|d| d.entropy_on),
                full_offload_ms: full.predicted_completion_ms,
                local_ms: profile.local_inference_time_ms(),
            })
        })
        .collect()
}

pub fn rate_sweep_csv(rows: &[RateSweepRow]) -> Result<String, SimError> {
    csv_string(rows)
}
