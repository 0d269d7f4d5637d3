//! Deadline-constrained choice of execution mode, budgets and entropy coding.
//!
//! Every option is enumerated. The feasible option with the highest accuracy
//! wins; ties go to lower completion time, then smaller raw size, then
//! smaller αk, then entropy off. When nothing meets the deadline the fastest
//! option is returned with `feasible = false`.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::budget::{BudgetPair, BudgetSets, SpatialBudget};
use crate::latency::{
    evaluate_option, LatencyError, LinkModel, OptionCost, REFERENCE_DIMS,
};
use crate::profile::{DeploymentProfile, Method};
use crate::tensor::ClipDims;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("budget sets are empty")]
    EmptyBudgets,
    #[error("no budget pair in the search space has profile data")]
    EmptyCoverage,
    #[error("deadline {0} ms must not be NaN or negative")]
    Deadline(f64),
    #[error("options have identical size and compute; no crossover")]
    Degenerate,
    #[error(transparent)]
    Latency(#[from] LatencyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Local,
    Offload,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanDecision {
    pub mode: Mode,
    pub method: Method,
    pub alpha_k: usize,
    pub beta_m: SpatialBudget,
    pub entropy_on: bool,
    pub predicted_completion_ms: f64,
    pub predicted_accuracy_pct: f64,
    pub feasible: bool,
    pub interpolated_accuracy: bool,
    pub raw_bytes: u64,
    pub size_bits: f64,
    pub comm_ms: f64,
    pub device_compute_ms: f64,
    pub server_compute_ms: f64,
}

impl PlanDecision {
    pub fn budgets(&self) -> BudgetPair {
        BudgetPair::new(self.alpha_k, self.beta_m)
    }

    fn from_option(o: &OptionCost, delta_ms: f64) -> Self {
        Self {
            mode: Mode::Offload,
            method: o.method,
            alpha_k: o.alpha_k,
            beta_m: o.beta_m,
            entropy_on: o.entropy_on,
            predicted_completion_ms: o.completion_ms,
            predicted_accuracy_pct: o.accuracy_pct,
            feasible: o.completion_ms <= delta_ms,
            interpolated_accuracy: o.interpolated,
            raw_bytes: o.raw_bytes,
            size_bits: o.size_bits,
            comm_ms: o.comm_ms,
            device_compute_ms: o.compute.device_ms,
            server_compute_ms: o.compute.server_ms,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerOptions {
    pub budgets: BudgetSets,
    /// Restrict the search to budget pairs tabulated in the profile.
    pub strict: bool,
    pub allow_local: bool,
    pub method: Method,
    pub dims: ClipDims,
}

impl Default for PlannerOptions {
    fn default() -> Self {
        Self {
            budgets: BudgetSets::default(),
            strict: false,
            allow_local: false,
            method: Method::Stae,
            dims: REFERENCE_DIMS,
        }
    }
}

/// Local execution: the whole clip at full budget, no communication.
/// Accuracy is that of the unpruned (F, 100%) entry.
pub fn local_option(
    profile: &DeploymentProfile,
    dims: ClipDims,
    delta_ms: f64,
) -> Result<PlanDecision, PlanError> {
    let acc = profile.terms(Method::Stae, dims.frames, SpatialBudget::FULL)
        .map_err(LatencyError::from)?;
    let t = profile.local_inference_time_ms();
    Ok(PlanDecision {
        mode: Mode::Local,
        method: Method::Stae,
        alpha_k: dims.frames,
        beta_m: SpatialBudget::FULL,
        entropy_on: false,
        predicted_completion_ms: t,
        predicted_accuracy_pct: acc.accuracy_pct,
        feasible: t <= delta_ms,
        interpolated_accuracy: acc.interpolated,
        raw_bytes: 0,
        size_bits: 0.0,
        comm_ms: 0.0,
        device_compute_ms: t,
        server_compute_ms: 0.0,
    })
}

/// Every evaluable option for the given link and deadline. Pairs without
/// profile data are skipped.
pub fn enumerate_options(
    link: &LinkModel,
    delta_ms: f64,
    profile: &DeploymentProfile,
    opts: &PlannerOptions,
) -> Result<Vec<PlanDecision>, PlanError> {
    if delta_ms.is_nan() || delta_ms < 0.0 {
        return Err(PlanError::Deadline(delta_ms));
    }
    if opts.budgets.is_empty() {
        return Err(PlanError::EmptyBudgets);
    }
    let mut out = Vec::new();
    for pair in opts.budgets.pairs() {
        if pair.alpha_k == 0 || pair.alpha_k > opts.dims.frames {
            continue;
        }
        if opts.strict && !profile.is_tabulated(opts.method, pair.alpha_k, pair.beta_m) {
            continue;
        }
        for entropy_on in [false, true] {
            match evaluate_option(opts.method, pair, entropy_on, link, profile, opts.dims) {
                Ok(o) => out.push(PlanDecision::from_option(&o, delta_ms)),
                Err(LatencyError::Profile(_) | LatencyError::NoEntropy { .. }) => {}
                Err(e) => return Err(e.into()),
            }
        }
    }
    if opts.allow_local {
        if let Ok(local) = local_option(profile, opts.dims, delta_ms) {
            out.push(local);
        }
    }
    if out.is_empty() {
        return Err(PlanError::EmptyCoverage);
    }
    Ok(out)
}

fn secondary(a: &PlanDecision, b: &PlanDecision) -> Ordering {
    a.raw_bytes
        .cmp(&b.raw_bytes)
        .then(a.alpha_k.cmp(&b.alpha_k))
        .then(a.entropy_on.cmp(&b.entropy_on))
        .then((a.mode == Mode::Offload).cmp(&(b.mode == Mode::Offload)))
}

/// `Less` means `a` is preferred.
pub fn preference(a: &PlanDecision, b: &PlanDecision) -> Ordering {
    b.predicted_accuracy_pct
        .total_cmp(&a.predicted_accuracy_pct)
        .then(a.predicted_completion_ms.total_cmp(&b.predicted_completion_ms))
        .then_with(|| secondary(a, b))
}

fn fallback_preference(a: &PlanDecision, b: &PlanDecision) -> Ordering {
    a.predicted_completion_ms
        .total_cmp(&b.predicted_completion_ms)
        .then(b.predicted_accuracy_pct.total_cmp(&a.predicted_accuracy_pct))
        .then_with(|| secondary(a, b))
}

pub fn select(options: &[PlanDecision]) -> Option<PlanDecision> {
    options
        .iter()
        .filter(|o| o.feasible)
        .min_by(|a, b| preference(a, b))
        .or_else(|| options.iter().min_by(|a, b| fallback_preference(a, b)))
        .copied()
}

pub fn plan(
    link: &LinkModel,
    delta_ms: f64,
    profile: &DeploymentProfile,
    opts: &PlannerOptions,
) -> Result<PlanDecision, PlanError> {
    let options = enumerate_options(link, delta_ms, profile, opts)?;
    Ok(select(&options).expect("enumerate_options never returns an empty list"))
}

/// True iff coding saves more transmission time than it costs.
pub fn entropy_worthwhile(
    method: Method,
    pair: BudgetPair,
    link: &LinkModel,
    profile: &DeploymentProfile,
    dims: ClipDims,
) -> Result<bool, PlanError> {
    let raw = evaluate_option(method, pair, false, link, profile, dims)?;
    let coded = evaluate_option(method, pair, true, link, profile, dims)?;
    let cost = coded.compute.total_ms() - raw.compute.total_ms();
    Ok(cost < raw.comm_ms - coded.comm_ms)
}

/// Completion time as `compute_ms + size_bits / (γ·10^3)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineCost {
    pub compute_ms: f64,
    pub size_bits: f64,
}

impl AffineCost {
    pub fn local(profile: &DeploymentProfile) -> Self {
        Self {
            compute_ms: profile.local_inference_time_ms(),
            size_bits: 0.0,
        }
    }

    pub fn of_option(o: &OptionCost) -> Self {
        Self {
            compute_ms: o.compute.total_ms(),
            size_bits: o.size_bits,
        }
    }

    pub fn of_decision(d: &PlanDecision) -> Self {
        Self {
            compute_ms: d.device_compute_ms + d.server_compute_ms,
            size_bits: d.size_bits,
        }
    }

    pub fn at(&self, gamma_mbps: f64) -> f64 {
        self.compute_ms + self.size_bits / (gamma_mbps * 1e3)
    }
}

/// Rate in Mbps at which both options finish together, if positive.
pub fn crossover_rate(a: AffineCost, b: AffineCost) -> Result<Option<f64>, PlanError> {
    let ds = a.size_bits - b.size_bits;
    let dc = b.compute_ms - a.compute_ms;
    if ds == 0.0 && dc == 0.0 {
        return Err(PlanError::Degenerate);
    }
    if ds == 0.0 || dc == 0.0 {
        return Ok(None);
    }
    let gamma = ds / (dc * 1e3);
    Ok((gamma > 0.0 && gamma.is_finite()).then_some(gamma))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pct(p: f64) -> SpatialBudget {
        SpatialBudget::from_percent(p).unwrap()
    }

    fn strict() -> PlannerOptions {
        PlannerOptions {
            strict: true,
            ..Default::default()
        }
    }

    #[test]
    fn hundred_mbps_case() {
        let p = DeploymentProfile::builtin();
        for opts in [strict(), PlannerOptions::default()] {
            let d = plan(&LinkModel::new(100.0).unwrap(), 100.0, &p, &opts).unwrap();
            assert_eq!((d.mode, d.alpha_k, d.beta_m, d.entropy_on), (Mode::Offload, 4, pct(40.0), true));
            assert_eq!(d.predicted_accuracy_pct, 70.1);
            assert!(d.feasible);
            assert!((d.predicted_completion_ms - 98.45).abs() < 0.01);
        }
    }

    #[test]
    fn two_hundred_mbps_case() {
        let p = DeploymentProfile::builtin();
        for opts in [strict(), PlannerOptions::default()] {
            let d = plan(&LinkModel::new(200.0).unwrap(), 100.0, &p, &opts).unwrap();
            assert_eq!((d.alpha_k, d.beta_m, d.entropy_on), (4, SpatialBudget::FULL, true));
            assert_eq!(d.predicted_accuracy_pct, 70.8);
        }
    }

    #[test]
    fn unbounded_deadline_takes_the_most_accurate_option() {
        let p = DeploymentProfile::builtin();
        let d = plan(&LinkModel::new(1.0).unwrap(), f64::INFINITY, &p, &strict()).unwrap();
        assert_eq!((d.alpha_k, d.beta_m), (16, SpatialBudget::FULL));
        assert_eq!(d.predicted_accuracy_pct, 73.3);
    }

    #[test]
    fn infeasible_returns_fastest() {
        let p = DeploymentProfile::builtin();
        let link = LinkModel::new(100.0).unwrap();
        let d = plan(&link, 0.0, &p, &strict()).unwrap();
        assert!(!d.feasible);
        let all = enumerate_options(&link, 0.0, &p, &strict()).unwrap();
        let fastest = all
            .iter()
            .map(|o| o.predicted_completion_ms)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(d.predicted_completion_ms, fastest);
    }

    #[test]
    fn local_wins_on_a_slow_link() {
        let p = DeploymentProfile::builtin();
        let opts = PlannerOptions {
            allow_local: true,
            ..strict()
        };
        let d = plan(&LinkModel::new(0.5).unwrap(), 1000.0, &p, &opts).unwrap();
        assert_eq!(d.mode, Mode::Local);
        assert_eq!(d.predicted_accuracy_pct, 73.3);
        let d = plan(&LinkModel::new(5.0).unwrap(), 300.0, &p, &opts).unwrap();
        assert_eq!(d.mode, Mode::Offload);
    }

    #[test]
    fn entropy_rule() {
        let p = DeploymentProfile::builtin();
        let pair = BudgetPair::new(1, pct(40.0));
        let w = |g: f64| {
            entropy_worthwhile(Method::Stae, pair, &LinkModel::new(g).unwrap(), &p, REFERENCE_DIMS)
                .unwrap()
        };
        assert!(w(10.0));
        assert!(!w(f64::INFINITY));
        assert!(!w(1e6));
    }

    #[test]
    fn crossover_algebra() {
        let local = AffineCost {
            compute_ms: 620.0,
            size_bits: 0.0,
        };
        let off = AffineCost {
            compute_ms: 20.0,
            size_bits: 6e5,
        };
        let g = crossover_rate(local, off).unwrap().unwrap();
        assert!((g - 1.0).abs() < 1e-12);
        assert!((local.at(g) - off.at(g)).abs() < 1e-9);
        let a = AffineCost {
            compute_ms: 10.0,
            size_bits: 2e6,
        };
        let b = AffineCost {
            compute_ms: 10.0,
            size_bits: 1e6,
        };
        assert_eq!(crossover_rate(a, b).unwrap(), None);
        assert_eq!(crossover_rate(a, a), Err(PlanError::Degenerate));
    }

    #[test]
    fn empty_sets_rejected() {
        let p = DeploymentProfile::builtin();
        let opts = PlannerOptions {
            budgets: BudgetSets {
                frames: vec![],
                spatial: vec![SpatialBudget::FULL],
            },
            ..Default::default()
        };
        assert_eq!(
            plan(&LinkModel::new(1.0).unwrap(), 1.0, &p, &opts),
            Err(PlanError::EmptyBudgets)
        );
        let opts = PlannerOptions {
            budgets: BudgetSets {
                frames: vec![3],
                spatial: vec![SpatialBudget::FULL],
            },
            ..Default::default()
        };
        assert_eq!(
            plan(&LinkModel::new(1.0).unwrap(), 1.0, &p, &opts),
            Err(PlanError::EmptyCoverage)
        );
    }
}
