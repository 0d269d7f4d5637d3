//! Periodic inference tasks replayed over a channel trace.
//!
//! Each task is planned with the rate seen at its release time. Device-side
//! compute runs first, the payload then drains through the trace, and
//! server-side compute follows. Tasks do not wait for each other unless
//! `fifo` serializes them on the link.

mod report;
mod trace;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::budget::BudgetSets;
use crate::latency::{LatencyError, LinkModel, SizeConvention, REFERENCE_DIMS};
use crate::planner::{plan, Mode, PlanDecision, PlanError, PlannerOptions};
use crate::profile::{DeploymentProfile, Method};
use crate::tensor::ClipDims;

pub use report::{
    export_records, frontier, frontier_csv, parse_records_csv, rate_sweep, rate_sweep_csv,
    FrontierRow, RateSweepRow, ReportFormat, RECORD_COLUMNS,
};
pub use trace::{ChannelTrace, Interpolation};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid trace: {0}")]
    Trace(String),
    #[error("trace covers [{start_ms}, {end_ms}] ms, needed {at_ms} ms")]
    Coverage { at_ms: f64, start_ms: f64, end_ms: f64 },
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error("report: {0}")]
    Report(String),
}

impl From<LatencyError> for SimError {
    fn from(e: LatencyError) -> Self {
        SimError::Plan(e.into())
    }
}

fn default_dims() -> ClipDims {
    REFERENCE_DIMS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub trace: ChannelTrace,
    pub period_ms: f64,
    pub deadline_ms: f64,
    pub horizon_ms: f64,
    #[serde(default = "default_dims")]
    pub dims: ClipDims,
    #[serde(default)]
    pub budgets: BudgetSets,
    #[serde(default)]
    pub strict: bool,
    #[serde(default)]
    pub allow_local: bool,
    #[serde(default = "default_method")]
    pub method: Method,
    #[serde(default)]
    pub size_convention: SizeConvention,
    #[serde(default)]
    pub seed: u64,
    /// Each release is delayed by a uniform draw from [0, jitter_ms).
    #[serde(default)]
    pub release_jitter_ms: f64,
    /// Serialize transmissions on a single link.
    #[serde(default)]
    pub fifo: bool,
}

fn default_method() -> Method {
    Method::Stae
}

impl Scenario {
    pub fn new(trace: ChannelTrace, period_ms: f64, deadline_ms: f64, horizon_ms: f64) -> Self {
        Self {
            trace,
            period_ms,
            deadline_ms,
            horizon_ms,
            dims: REFERENCE_DIMS,
            budgets: BudgetSets::default(),
            strict: false,
            allow_local: false,
            method: Method::Stae,
            size_convention: SizeConvention::PayloadOnly,
            seed: 0,
            release_jitter_ms: 0.0,
            fifo: false,
        }
    }

    pub fn planner_options(&self) -> PlannerOptions {
        PlannerOptions {
            budgets: self.budgets.clone(),
            strict: self.strict,
            allow_local: self.allow_local,
            method: self.method,
            dims: self.dims,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::Scenario(m.into()));
        if !(self.period_ms.is_finite() && self.period_ms > 0.0) {
            return bad("period_ms must be positive");
        }
        if !(self.horizon_ms.is_finite() && self.horizon_ms >= self.period_ms) {
            return bad("horizon_ms must be at least period_ms");
        }
        if self.deadline_ms.is_nan() || self.deadline_ms < 0.0 {
            return bad("deadline_ms must be non-negative");
        }
        if !(self.release_jitter_ms.is_finite() && self.release_jitter_ms >= 0.0) {
            return bad("release_jitter_ms must be non-negative");
        }
        self.dims
            .validate()
            .map_err(|e| SimError::Scenario(e.to_string()))?;
        if self.trace.start_ms() > 0.0 || self.trace.end_ms() < self.horizon_ms {
            return Err(SimError::Coverage {
                at_ms: if self.trace.start_ms() > 0.0 { 0.0 } else { self.horizon_ms },
                start_ms: self.trace.start_ms(),
                end_ms: self.trace.end_ms(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub index: usize,
    pub release_ms: f64,
    pub gamma_at_release_mbps: f64,
    pub decision: PlanDecision,
    pub tx_start_ms: f64,
    pub tx_end_ms: f64,
    /// Release to result, in ms.
    pub actual_completion_ms: f64,
    pub met_deadline: bool,
    pub expected_accuracy_pct: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub tasks: usize,
    pub misses: usize,
    pub miss_rate: f64,
    pub infeasible_decisions: usize,
    pub mean_expected_accuracy_pct: f64,
    /// Mean accuracy counting deadline misses as 0.
    pub mean_effective_accuracy_pct: f64,
    pub p50_completion_ms: f64,
    pub p95_completion_ms: f64,
    pub max_completion_ms: f64,
}

/// Nearest-rank percentile of `sorted` (ascending, non-empty).
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

pub fn summarize(records: &[TaskRecord]) -> Summary {
    let n = records.len();
    let misses = records.iter().filter(|r| !r.met_deadline).count();
    let mut times: Vec<f64> = records.iter().map(|r| r.actual_completion_ms).collect();
    times.sort_by(f64::total_cmp);
    let mean = |f: &dyn Fn(&TaskRecord) -> f64| {
        if n == 0 {
            0.0
        } else {
            records.iter().map(f).sum::<f64>() / n as f64
        }
    };
    let pct = |p| if n == 0 { 0.0 } else { percentile(&times, p) };
    Summary {
        tasks: n,
        misses,
        miss_rate: if n == 0 { 0.0 } else { misses as f64 / n as f64 },
        infeasible_decisions: records.iter().filter(|r| !r.decision.feasible).count(),
        mean_expected_accuracy_pct: mean(&|r| r.expected_accuracy_pct),
        mean_effective_accuracy_pct: mean(&|r| {
            if r.met_deadline {
                r.expected_accuracy_pct
            } else {
                0.0
            }
        }),
        p50_completion_ms: pct(50.0),
        p95_completion_ms: pct(95.0),
        max_completion_ms: times.last().copied().unwrap_or(0.0),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub summary: Summary,
    pub records: Vec<TaskRecord>,
}

pub fn release_times(scenario: &Scenario) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let mut out = Vec::new();
    let mut k = 0u64;
    loop {
        let base = k as f64 * scenario.period_ms;
        if base >= scenario.horizon_ms {
            break;
        }
        let jitter = if scenario.release_jitter_ms > 0.0 {
            rng.gen_range(0.0..scenario.release_jitter_ms)
        } else {
            0.0
        };
        out.push((base + jitter).min(scenario.horizon_ms));
        k += 1;
    }
    out
}

pub fn run(scenario: &Scenario, profile: &DeploymentProfile) -> Result<SimulationResult, SimError> {
    scenario.validate()?;
    let opts = scenario.planner_options();
    let mut link_free_ms = f64::NEG_INFINITY;
    let mut records = Vec::new();
    for (index, release_ms) in release_times(scenario).into_iter().enumerate() {
        let gamma = scenario.trace.rate_at(release_ms)?;
        let link = LinkModel::with_convention(gamma, scenario.size_convention)?;
        let decision = plan(&link, scenario.deadline_ms, profile, &opts)?;
        let (tx_start_ms, tx_end_ms, done_ms) = match decision.mode {
            Mode::Local => {
                let done = release_ms + decision.predicted_completion_ms;
                (done, done, done)
            }
            Mode::Offload => {
                let mut start = release_ms + decision.device_compute_ms;
                if scenario.fifo {
                    start = start.max(link_free_ms);
                }
                let end = scenario
                    .trace
                    .integrate_transmission(decision.size_bits, start)?;
                link_free_ms = end;
                (start, end, end + decision.server_compute_ms)
            }
        };
        let actual_completion_ms = done_ms - release_ms;
        records.push(TaskRecord {
            index,
            release_ms,
            gamma_at_release_mbps: gamma,
            decision,
            tx_start_ms,
            tx_end_ms,
            actual_completion_ms,
            met_deadline: actual_completion_ms <= scenario.deadline_ms,
            expected_accuracy_pct: decision.predicted_accuracy_pct,
        });
    }
    Ok(SimulationResult {
        summary: summarize(&records),
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::budget::SpatialBudget;

    fn profile() -> DeploymentProfile {
        DeploymentProfile::builtin()
    }

    #[test]
    fn constant_trace_reproduces_closed_form() {
        let s = Scenario::new(ChannelTrace::constant(100.0, 10_000.0).unwrap(), 200.0, 100.0, 2000.0);
        let r = run(&s, &profile()).unwrap();
        assert_eq!(r.records.len(), 10);
        for rec in &r.records {
            assert_eq!(rec.decision.alpha_k, 4);
            assert_eq!(rec.decision.beta_m, SpatialBudget::from_percent(40.0).unwrap());
            assert!((rec.actual_completion_ms - rec.decision.predicted_completion_ms).abs() < 1e-9);
            assert!(rec.met_deadline);
            assert_eq!(rec.expected_accuracy_pct, 70.1);
        }
        assert_eq!(r.summary.misses, 0);
    }

    #[test]
    fn zero_deadline_misses_everything() {
        let mut s = Scenario::new(ChannelTrace::constant(100.0, 10_000.0).unwrap(), 100.0, 0.0, 1000.0);
        s.strict = true;
        let r = run(&s, &profile()).unwrap();
        assert_eq!(r.summary.miss_rate, 1.0);
        assert_eq!(r.summary.infeasible_decisions, r.records.len());
        assert_eq!(r.summary.mean_effective_accuracy_pct, 0.0);
    }

    #[test]
    fn short_trace_rejected() {
        let s = Scenario::new(ChannelTrace::constant(100.0, 500.0).unwrap(), 100.0, 100.0, 1000.0);
        assert!(matches!(run(&s, &profile()), Err(SimError::Coverage { .. })));
        let s = Scenario::new(ChannelTrace::constant(100.0, 960.0).unwrap(), 100.0, 100.0, 960.0);
        // the last task's transfer runs past the end of the trace
        assert!(matches!(run(&s, &profile()), Err(SimError::Coverage { .. })));
    }

    #[test]
    fn fifo_queues_transfers() {
        let trace = ChannelTrace::constant(100.0, 10_000.0).unwrap();
        let mut s = Scenario::new(trace, 10.0, 1000.0, 100.0);
        s.fifo = true;
        let r = run(&s, &profile()).unwrap();
        for w in r.records.windows(2) {
            assert!(w[1].tx_start_ms >= w[0].tx_end_ms);
        }
        s.fifo = false;
        let free = run(&s, &profile()).unwrap();
        assert!(free.summary.max_completion_ms < r.summary.max_completion_ms);
    }

    #[test]
    fn jitter_is_seeded() {
        let trace = ChannelTrace::constant(100.0, 10_000.0).unwrap();
        let mut s = Scenario::new(trace, 100.0, 100.0, 1000.0);
        s.release_jitter_ms = 20.0;
        s.seed = 7;
        let a = release_times(&s);
        assert_eq!(a, release_times(&s));
        s.seed = 8;
        assert_ne!(a, release_times(&s));
        assert!(a.iter().enumerate().all(|(k, &t)| t >= k as f64 * 100.0 && t < k as f64 * 100.0 + 20.0));
    }

    #[test]
    fn percentiles_use_nearest_rank() {
        let v: Vec<f64> = (1..=20).map(f64::from).collect();
        assert_eq!(percentile(&v, 50.0), 10.0);
        assert_eq!(percentile(&v, 95.0), 19.0);
        assert_eq!(percentile(&v, 100.0), 20.0);
        assert_eq!(percentile(&[3.0], 50.0), 3.0);
    }

    #[test]
    fn invalid_scenarios() {
        let trace = ChannelTrace::constant(100.0, 10_000.0).unwrap();
        let p = profile();
        assert!(run(&Scenario::new(trace.clone(), 0.0, 100.0, 1000.0), &p).is_err());
        assert!(run(&Scenario::new(trace.clone(), 100.0, 100.0, 50.0), &p).is_err());
        assert!(run(&Scenario::new(trace, 100.0, -1.0, 1000.0), &p).is_err());
    }
}
