//! Compressed size, communication time, computation time and completion
//! time for one inference task.
//!
//! Units: sizes in bytes or bits, MiB = 2^20 bytes, rates in Mbps
//! (10^6 bit/s), times in milliseconds.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::budget::{BudgetPair, SpatialBudget};
use crate::codec::header_bytes;
use crate::profile::{CostTerms, DeploymentProfile, Method, ProfileError};
use crate::tensor::ClipDims;

pub const BYTES_PER_ELEMENT: u64 = 4;
pub const MIB: f64 = 1_048_576.0;

/// The clip shape the default profile was measured at.
pub const REFERENCE_DIMS: ClipDims = ClipDims::new(16, 3, 224, 224);

/// Worst-case serialized code table: count, 256 (symbol, length) pairs and
/// the u64 bit length.
const MAX_TABLE_BYTES: u64 = 2 + 2 * 256 + 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LatencyError {
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error("no entropy measurements for {method} αk={alpha_k} βm={beta_m}")]
    NoEntropy {
        method: Method,
        alpha_k: usize,
        beta_m: SpatialBudget,
    },
    #[error("frame budget {alpha_k} exceeds the clip's {frames} frames")]
    FrameBudget { alpha_k: usize, frames: usize },
    #[error("data rate {0} Mbps must be positive")]
    Rate(f64),
}

/// What counts towards the transmitted size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SizeConvention {
    /// Payload values only, as in the size formula.
    #[default]
    PayloadOnly,
    /// Payload plus packet header, frame indices, masks and (when coded) a
    /// worst-case code table.
    FullPacket,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkModel {
    pub gamma_mbps: f64,
    #[serde(default)]
    pub size: SizeConvention,
}

impl LinkModel {
    pub fn new(gamma_mbps: f64) -> Result<Self, LatencyError> {
        Self::with_convention(gamma_mbps, SizeConvention::PayloadOnly)
    }

    pub fn with_convention(gamma_mbps: f64, size: SizeConvention) -> Result<Self, LatencyError> {
        if !(gamma_mbps.is_finite() || gamma_mbps == f64::INFINITY) || gamma_mbps <= 0.0 {
            return Err(LatencyError::Rate(gamma_mbps));
        }
        Ok(Self { gamma_mbps, size })
    }
}

/// αk·C·⌊βm·H·W⌋.
pub fn element_count(alpha_k: usize, beta_m: SpatialBudget, dims: ClipDims) -> u64 {
    alpha_k as u64 * dims.channels as u64 * beta_m.pixels(dims.height, dims.width) as u64
}

pub fn raw_size_bytes(alpha_k: usize, beta_m: SpatialBudget, dims: ClipDims) -> u64 {
    BYTES_PER_ELEMENT * element_count(alpha_k, beta_m, dims)
}

pub fn bytes_to_mib(bytes: u64) -> f64 {
    bytes as f64 / MIB
}

/// Payload bits after entropy coding at the profiled bits per element.
pub fn coded_size_bits(
    method: Method,
    alpha_k: usize,
    beta_m: SpatialBudget,
    dims: ClipDims,
    profile: &DeploymentProfile,
) -> Result<f64, LatencyError> {
    let terms = profile.terms(method, alpha_k, beta_m)?;
    let e = terms.entropy.ok_or(LatencyError::NoEntropy {
        method,
        alpha_k,
        beta_m,
    })?;
    Ok(element_count(alpha_k, beta_m, dims) as f64 * e.bits_per_element)
}

/// Bits the packet adds around the payload.
pub fn packet_overhead_bits(alpha_k: usize, dims: ClipDims, entropy_on: bool) -> u64 {
    let masks = alpha_k as u64 * dims.pixels().div_ceil(8) as u64;
    let indices = 2 * alpha_k as u64;
    let table = if entropy_on { MAX_TABLE_BYTES } else { 0 };
    8 * (header_bytes() as u64 + indices + masks + table)
}

pub fn comm_time_ms(size_bits: f64, link: &LinkModel) -> f64 {
    size_bits / (link.gamma_mbps * 1e3)
}

/// Device-side and server-side compute for one option. Encoding stages run
/// before transmission, decoding and inference after it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComputeSplit {
    pub device_ms: f64,
    pub server_ms: f64,
}

impl ComputeSplit {
    pub fn total_ms(&self) -> f64 {
        self.device_ms + self.server_ms
    }
}

pub fn compute_split(terms: &CostTerms, entropy_on: bool) -> Option<ComputeSplit> {
    let (ee, ed) = if entropy_on {
        let e = terms.entropy?;
        (e.t_ee_ms, e.t_ed_ms)
    } else {
        (0.0, 0.0)
    };
    Some(ComputeSplit {
        device_ms: terms.t_fa_ms + terms.t_sa_ms + ee,
        server_ms: ed + terms.t_fr_ms + terms.t_vit_ms,
    })
}

pub fn compute_time_ms(
    method: Method,
    alpha_k: usize,
    beta_m: SpatialBudget,
    profile: &DeploymentProfile,
    entropy_on: bool,
) -> Result<f64, LatencyError> {
    let terms = profile.terms(method, alpha_k, beta_m)?;
    compute_split(&terms, entropy_on)
        .map(|s| s.total_ms())
        .ok_or(LatencyError::NoEntropy {
            method,
            alpha_k,
            beta_m,
        })
}

/// Full evaluation of one offload option.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptionCost {
    pub method: Method,
    pub alpha_k: usize,
    pub beta_m: SpatialBudget,
    pub entropy_on: bool,
    pub raw_bytes: u64,
    /// Bits on the wire under the link's size convention.
    pub size_bits: f64,
    pub comm_ms: f64,
    pub compute: ComputeSplit,
    pub completion_ms: f64,
    pub accuracy_pct: f64,
    pub interpolated: bool,
}

pub fn evaluate_option(
    method: Method,
    pair: BudgetPair,
    entropy_on: bool,
    link: &LinkModel,
    profile: &DeploymentProfile,
    dims: ClipDims,
) -> Result<OptionCost, LatencyError> {
    let BudgetPair { alpha_k, beta_m } = pair;
    if alpha_k == 0 || alpha_k > dims.frames {
        return Err(LatencyError::FrameBudget {
            alpha_k,
            frames: dims.frames,
        });
    }
    let terms = profile.terms(method, alpha_k, beta_m)?;
    let no_entropy = LatencyError::NoEntropy {
        method,
        alpha_k,
        beta_m,
    };
    let compute = compute_split(&terms, entropy_on).ok_or(no_entropy.clone())?;
    let raw_bytes = raw_size_bytes(alpha_k, beta_m, dims);
    let payload_bits = if entropy_on {
        let e = terms.entropy.ok_or(no_entropy)?;
        element_count(alpha_k, beta_m, dims) as f64 * e.bits_per_element
    } else {
        (raw_bytes * 8) as f64
    };
    let size_bits = match link.size {
        SizeConvention::PayloadOnly => payload_bits,
        SizeConvention::FullPacket => {
            payload_bits + packet_overhead_bits(alpha_k, dims, entropy_on) as f64
        }
    };
    let comm_ms = comm_time_ms(size_bits, link);
    Ok(OptionCost {
        method,
        alpha_k,
        beta_m,
        entropy_on,
        raw_bytes,
        size_bits,
        comm_ms,
        compute,
        completion_ms: comm_ms + compute.total_ms(),
        accuracy_pct: terms.accuracy_pct,
        interpolated: terms.interpolated,
    })
}

pub fn completion_time_ms(
    method: Method,
    pair: BudgetPair,
    entropy_on: bool,
    link: &LinkModel,
    profile: &DeploymentProfile,
    dims: ClipDims,
) -> Result<f64, LatencyError> {
    evaluate_option(method, pair, entropy_on, link, profile, dims).map(|o| o.completion_ms)
}

/// Size of the uncompressed clip sent raw over the size of `pair` after
/// entropy coding.
pub fn compression_ratio(
    method: Method,
    pair: BudgetPair,
    dims: ClipDims,
    profile: &DeploymentProfile,
) -> Result<f64, LatencyError> {
    let full = (raw_size_bytes(dims.frames, SpatialBudget::FULL, dims) * 8) as f64;
    Ok(full / coded_size_bits(method, pair.alpha_k, pair.beta_m, dims, profile)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pct(p: f64) -> SpatialBudget {
        SpatialBudget::from_percent(p).unwrap()
    }

    #[test]
    fn raw_sizes() {
        assert_eq!(raw_size_bytes(16, SpatialBudget::FULL, REFERENCE_DIMS), 9_633_792);
        assert_eq!(raw_size_bytes(1, pct(40.0), REFERENCE_DIMS), 240_840);
        assert_eq!(raw_size_bytes(4, pct(40.0), REFERENCE_DIMS), 963_360);
        assert!((bytes_to_mib(9_633_792) - 9.1875).abs() < 1e-12);
    }

    #[test]
    fn coded_sizes() {
        let p = DeploymentProfile::builtin();
        let bits = coded_size_bits(Method::Stae, 4, pct(40.0), REFERENCE_DIMS, &p).unwrap();
        assert!((bits - 240_840.0 * 12.89).abs() < 1e-6);
        let r = compression_ratio(Method::Stae, BudgetPair::new(1, pct(40.0)), REFERENCE_DIMS, &p)
            .unwrap();
        assert!((r - 77_070_336.0 / (60_210.0 * 12.26)).abs() < 1e-9);
    }

    #[test]
    fn comm_times() {
        let l100 = LinkModel::new(100.0).unwrap();
        assert!((comm_time_ms(1e6, &l100) - 10.0).abs() < 1e-12);
        let l200 = LinkModel::new(200.0).unwrap();
        assert!((comm_time_ms(1e6, &l200) - 5.0).abs() < 1e-12);
        assert!(LinkModel::new(0.0).is_err());
        assert!(LinkModel::new(f64::NAN).is_err());
        assert_eq!(comm_time_ms(1e6, &LinkModel::new(f64::INFINITY).unwrap()), 0.0);
    }

    #[test]
    fn compute_times() {
        let p = DeploymentProfile::builtin();
        let t = compute_time_ms(Method::Stae, 4, pct(40.0), &p, true).unwrap();
        assert!((t - 67.41).abs() < 1e-9);
        let t = compute_time_ms(Method::Stae, 16, SpatialBudget::FULL, &p, false).unwrap();
        assert!((t - 31.5).abs() < 1e-9);
        let t = compute_time_ms(Method::Stae, 1, SpatialBudget::FULL, &p, false).unwrap();
        assert!((t - 9.5).abs() < 1e-9);
        let t = compute_time_ms(Method::Deepisc, 16, pct(40.0), &p, false).unwrap();
        assert!((t - (82.7 + 31.5)).abs() < 1e-9);
    }

    #[test]
    fn completion_times() {
        let p = DeploymentProfile::builtin();
        let a = evaluate_option(
            Method::Stae,
            BudgetPair::new(4, pct(40.0)),
            true,
            &LinkModel::new(100.0).unwrap(),
            &p,
            REFERENCE_DIMS,
        )
        .unwrap();
        assert!((a.completion_ms - (240_840.0 * 12.89 / 1e5 + 67.41)).abs() < 1e-9);
        assert_eq!(a.completion_ms, a.comm_ms + a.compute.total_ms());
        let b = completion_time_ms(
            Method::Stae,
            BudgetPair::new(4, SpatialBudget::FULL),
            true,
            &LinkModel::new(200.0).unwrap(),
            &p,
            REFERENCE_DIMS,
        )
        .unwrap();
        assert!((b - 75.6).abs() < 0.05);
    }

    #[test]
    fn full_packet_adds_overhead() {
        let p = DeploymentProfile::builtin();
        let pair = BudgetPair::new(1, pct(40.0));
        let payload = LinkModel::new(100.0).unwrap();
        let full = LinkModel::with_convention(100.0, SizeConvention::FullPacket).unwrap();
        let a = evaluate_option(Method::Stae, pair, false, &payload, &p, REFERENCE_DIMS).unwrap();
        let b = evaluate_option(Method::Stae, pair, false, &full, &p, REFERENCE_DIMS).unwrap();
        assert_eq!(b.size_bits - a.size_bits, (8 * (22 + 2 + 6272)) as f64);
    }

    #[test]
    fn frame_budget_checked() {
        let p = DeploymentProfile::builtin();
        let err = evaluate_option(
            Method::Stae,
            BudgetPair::new(16, SpatialBudget::FULL),
            false,
            &LinkModel::new(1.0).unwrap(),
            &p,
            ClipDims::new(8, 3, 224, 224),
        );
        assert!(matches!(err, Err(LatencyError::FrameBudget { .. })));
    }
}
