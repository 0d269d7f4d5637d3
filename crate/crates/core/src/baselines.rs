//! Fixed-budget evaluation and the DeepISC comparison path.
//!
//! DeepISC is represented only by its measured numbers: its encode/recover
//! time sits in the profile's SA column and its payload size follows the same
//! element count as STAE.

use serde::{Deserialize, Serialize};

use crate::budget::{BudgetPair, SpatialBudget};
use crate::latency::{evaluate_option, LinkModel};
use crate::planner::{entropy_worthwhile, Mode, PlanDecision, PlanError};
use crate::profile::{DeploymentProfile, Method};
use crate::tensor::ClipDims;

/// Evaluate one method at fixed budgets. Entropy coding is used only when it
/// pays for itself on this link.
pub fn evaluate_fixed(
    method: Method,
    pair: BudgetPair,
    link: &LinkModel,
    delta_ms: f64,
    profile: &DeploymentProfile,
    dims: ClipDims,
) -> Result<PlanDecision, PlanError> {
    if delta_ms.is_nan() || delta_ms < 0.0 {
        return Err(PlanError::Deadline(delta_ms));
    }
    let entropy_on = profile
        .terms(method, pair.alpha_k, pair.beta_m)
        .is_ok_and(|t| t.entropy.is_some())
        && entropy_worthwhile(method, pair, link, profile, dims)?;
    let o = evaluate_option(method, pair, entropy_on, link, profile, dims)?;
    Ok(PlanDecision {
        mode: Mode::Offload,
        method,
        alpha_k: pair.alpha_k,
        beta_m: pair.beta_m,
        entropy_on,
        predicted_completion_ms: o.completion_ms,
        predicted_accuracy_pct: o.accuracy_pct,
        feasible: o.completion_ms <= delta_ms,
        interpolated_accuracy: o.interpolated,
        raw_bytes: o.raw_bytes,
        size_bits: o.size_bits,
        comm_ms: o.comm_ms,
        device_compute_ms: o.compute.device_ms,
        server_compute_ms: o.compute.server_ms,
    })
}

pub fn evaluate_baseline(
    pair: BudgetPair,
    link: &LinkModel,
    delta_ms: f64,
    profile: &DeploymentProfile,
    dims: ClipDims,
) -> Result<PlanDecision, PlanError> {
    evaluate_fixed(Method::Deepisc, pair, link, delta_ms, profile, dims)
}

/// Full offload: the whole clip sent raw, no encoder or recovery.
pub fn full_offload(
    link: &LinkModel,
    delta_ms: f64,
    profile: &DeploymentProfile,
    dims: ClipDims,
) -> Result<PlanDecision, PlanError> {
    let pair = BudgetPair::new(dims.frames, SpatialBudget::FULL);
    let o = evaluate_option(Method::Stae, pair, false, link, profile, dims)?;
    let mut d = evaluate_fixed(Method::Stae, pair, link, delta_ms, profile, dims)?;
    if d.entropy_on {
        d = PlanDecision {
            entropy_on: false,
            predicted_completion_ms: o.completion_ms,
            feasible: o.completion_ms <= delta_ms,
            size_bits: o.size_bits,
            comm_ms: o.comm_ms,
            device_compute_ms: o.compute.device_ms,
            server_compute_ms: o.compute.server_ms,
            ..d
        };
    }
    Ok(d)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub stae: PlanDecision,
    pub deepisc: PlanDecision,
    /// STAE accuracy minus DeepISC accuracy, percentage points.
    pub accuracy_gain_pct: f64,
    /// DeepISC completion time minus STAE's.
    pub time_saving_ms: f64,
}

pub fn compare(
    pair: BudgetPair,
    link: &LinkModel,
    delta_ms: f64,
    profile: &DeploymentProfile,
    dims: ClipDims,
) -> Result<Comparison, PlanError> {
    let stae = evaluate_fixed(Method::Stae, pair, link, delta_ms, profile, dims)?;
    let deepisc = evaluate_baseline(pair, link, delta_ms, profile, dims)?;
    Ok(Comparison {
        stae,
        deepisc,
        accuracy_gain_pct: stae.predicted_accuracy_pct - deepisc.predicted_accuracy_pct,
        time_saving_ms: deepisc.predicted_completion_ms - stae.predicted_completion_ms,
    })
}

/// Largest STAE-over-DeepISC accuracy gain across pairs both methods have
/// accuracies for.
pub fn max_accuracy_gain(profile: &DeploymentProfile) -> Option<(BudgetPair, f64)> {
    profile
        .entries()
        .filter(|e| e.method == Method::Stae)
        .filter_map(|s| {
            let d = profile.entry(Method::Deepisc, s.alpha_k, s.beta_m)?;
            Some((
                BudgetPair::new(s.alpha_k, s.beta_m),
                s.accuracy_pct? - d.accuracy_pct?,
            ))
        })
        .max_by(|a, b| a.1.total_cmp(&b.1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::latency::REFERENCE_DIMS;

    fn forty(alpha_k: usize) -> BudgetPair {
        BudgetPair::new(alpha_k, SpatialBudget::from_percent(40.0).unwrap())
    }

    #[test]
    fn accuracy_gain_at_one_frame() {
        let p = DeploymentProfile::builtin();
        let c = compare(forty(1), &LinkModel::new(100.0).unwrap(), 100.0, &p, REFERENCE_DIMS).unwrap();
        assert!((c.accuracy_gain_pct - 5.3).abs() < 1e-9);
        let (pair, gain) = max_accuracy_gain(&p).unwrap();
        assert_eq!(pair, forty(1));
        assert!((gain - 5.3).abs() < 1e-9);
    }

    #[test]
    fn deepisc_compute_includes_its_codec_time() {
        let p = DeploymentProfile::builtin();
        let link = LinkModel::new(f64::INFINITY).unwrap();
        let d = evaluate_baseline(forty(16), &link, 1e9, &p, REFERENCE_DIMS).unwrap();
        assert!(!d.entropy_on);
        assert!((d.device_compute_ms + d.server_compute_ms - (82.7 + 31.5)).abs() < 1e-9);
    }

    #[test]
    fn stae_faster_than_deepisc_at_one_frame() {
        let p = DeploymentProfile::builtin();
        for g in [1.0, 10.0, 100.0, 1000.0, 1e5] {
            let link = LinkModel::new(g).unwrap();
            let c = compare(forty(1), &link, 1e9, &p, REFERENCE_DIMS).unwrap();
            assert!(c.time_saving_ms > 0.0, "γ={g}");
        }
        for a in [1, 2, 4, 8, 16] {
            let c = compare(forty(a), &LinkModel::new(100.0).unwrap(), 1e9, &p, REFERENCE_DIMS).unwrap();
            assert!(c.accuracy_gain_pct > 0.0);
            assert!(c.time_saving_ms > 0.0);
        }
    }

    #[test]
    fn equal_profiles_give_identical_decisions() {
        let text = DeploymentProfile::builtin().to_csv_string();
        let mirrored: String = text
            .lines()
            .enumerate()
            .filter(|(i, l)| *i == 0 || l.starts_with("stae"))
            .flat_map(|(i, l)| {
                let mut v = vec![l.to_string()];
                if i > 0 {
                    v.push(l.replacen("stae", "deepisc", 1));
                }
                v
            })
            .collect::<Vec<_>>()
            .join("\n");
        let p = DeploymentProfile::from_csv_str(&mirrored).unwrap();
        let link = LinkModel::new(50.0).unwrap();
        let s = evaluate_fixed(Method::Stae, forty(4), &link, 100.0, &p, REFERENCE_DIMS).unwrap();
        let d = evaluate_baseline(forty(4), &link, 100.0, &p, REFERENCE_DIMS).unwrap();
        assert_eq!(PlanDecision { method: Method::Stae, ..d }, s);
    }

    #[test]
    fn full_offload_is_raw() {
        let p = DeploymentProfile::builtin();
        let d = full_offload(&LinkModel::new(100.0).unwrap(), 1e9, &p, REFERENCE_DIMS).unwrap();
        assert!(!d.entropy_on);
        assert!((d.predicted_completion_ms - (770.70336 + 31.5)).abs() < 1e-9);
    }
}
