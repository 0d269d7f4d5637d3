//! Measured per-budget costs and accuracies that drive the latency model.
//!
//! CSV columns (header required, in this order):
//! `method, alpha_k, beta_m_percent, t_fa_ms, t_sa_ms, t_fr_ms, t_vit_ms,
//! t_ee_ms, t_ed_ms, entropy_bits, accuracy_pct, accuracy_spread`.
//! Empty numeric cells mean "not measured". For `deepisc` rows the whole
//! DeepISC encode/recover time goes in `t_sa_ms` and `t_fr_ms` is 0.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::budget::SpatialBudget;

/// Tables I and II as shipped.
pub const DEFAULT_PROFILE_CSV: &str = include_str!("../data/default_profile.csv");

/// On-device full-model inference time used when none is supplied. Not a
/// measured value: chosen so local execution only wins below ~1.2 Mbps.
pub const DEFAULT_LOCAL_INFERENCE_MS: f64 = 620.0;

pub const CSV_COLUMNS: [&str; 12] = [
    "method",
    "alpha_k",
    "beta_m_percent",
    "t_fa_ms",
    "t_sa_ms",
    "t_fr_ms",
    "t_vit_ms",
    "t_ee_ms",
    "t_ed_ms",
    "entropy_bits",
    "accuracy_pct",
    "accuracy_spread",
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProfileError {
    #[error("profile csv: {0}")]
    Csv(String),
    #[error("line {line}: {msg}")]
    Malformed { line: u64, msg: String },
    #[error("line {line}: duplicate entry for {method} αk={alpha_k} βm={beta_m}")]
    Duplicate {
        line: u64,
        method: Method,
        alpha_k: usize,
        beta_m: SpatialBudget,
    },
    #[error("line {line}: {field} = {value} out of range")]
    OutOfRange {
        line: u64,
        field: &'static str,
        value: f64,
    },
    #[error("no profile data for {method} αk={alpha_k} βm={beta_m}")]
    NoEntry {
        method: Method,
        alpha_k: usize,
        beta_m: SpatialBudget,
    },
    #[error("{method} αk={alpha_k} βm={beta_m} has no {field}")]
    MissingField {
        method: Method,
        alpha_k: usize,
        beta_m: SpatialBudget,
        field: &'static str,
    },
    #[error("local inference time {0} must be finite and non-negative")]
    LocalTime(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Stae,
    Deepisc,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Stae => "stae",
            Method::Deepisc => "deepisc",
        })
    }
}

impl FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "stae" => Ok(Method::Stae),
            "deepisc" => Ok(Method::Deepisc),
            other => Err(format!("unknown method `{other}`")),
        }
    }
}

/// One CSV row. Every measurement is optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileEntry {
    pub method: Method,
    pub alpha_k: usize,
    pub beta_m: SpatialBudget,
    pub t_fa_ms: Option<f64>,
    pub t_sa_ms: Option<f64>,
    pub t_fr_ms: Option<f64>,
    pub t_vit_ms: Option<f64>,
    pub t_ee_ms: Option<f64>,
    pub t_ed_ms: Option<f64>,
    pub entropy_bits: Option<f64>,
    pub accuracy_pct: Option<f64>,
    pub accuracy_spread: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyTerms {
    pub bits_per_element: f64,
    pub t_ee_ms: f64,
    pub t_ed_ms: f64,
}

/// Everything the cost model needs for one (method, αk, βm).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostTerms {
    pub t_fa_ms: f64,
    pub t_sa_ms: f64,
    pub t_fr_ms: f64,
    pub t_vit_ms: f64,
    /// `None` when the entropy stage was not measured for this budget.
    pub entropy: Option<EntropyTerms>,
    pub accuracy_pct: f64,
    /// True when βm was not tabulated and the terms were interpolated.
    pub interpolated: bool,
}

type Key = (Method, usize, SpatialBudget);

#[derive(Debug, Clone, PartialEq)]
pub struct DeploymentProfile {
    entries: BTreeMap<Key, ProfileEntry>,
    local_inference_time_ms: f64,
}

fn parse_cell(line: u64, field: &'static str, raw: &str) -> Result<Option<f64>, ProfileError> {
    let raw = raw.trim();
    if raw.is_empty() {
        return Ok(None);
    }
    let v: f64 = raw.parse().map_err(|_| ProfileError::Malformed {
        line,
        msg: format!("{field}: `{raw}` is not a number"),
    })?;
    if !v.is_finite() {
        return Err(ProfileError::OutOfRange {
            line,
            field,
            value: v,
        });
    }
    Ok(Some(v))
}

fn check(
    line: u64,
    field: &'static str,
    v: Option<f64>,
    ok: impl Fn(f64) -> bool,
) -> Result<Option<f64>, ProfileError> {
    match v {
        Some(x) if !ok(x) => Err(ProfileError::OutOfRange {
            line,
            field,
            value: x,
        }),
        other => Ok(other),
    }
}

fn fmt_cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl DeploymentProfile {
    /// The embedded Tables I–II profile.
    pub fn builtin() -> Self {
        Self::from_csv_str(DEFAULT_PROFILE_CSV).expect("embedded profile is valid")
    }

    pub fn from_csv_str(text: &str) -> Result<Self, ProfileError> {
        Self::from_reader(text.as_bytes())
    }

    pub fn from_reader(reader: impl std::io::Read) -> Result<Self, ProfileError> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| ProfileError::Csv(e.to_string()))?
            .clone();
        if headers.iter().collect::<Vec<_>>() != CSV_COLUMNS {
            return Err(ProfileError::Malformed {
                line: 1,
                msg: format!("expected header {}", CSV_COLUMNS.join(",")),
            });
        }
        let mut entries = BTreeMap::new();
        for record in rdr.records() {
            let record = record.map_err(|e| ProfileError::Csv(e.to_string()))?;
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            let method: Method = record[0]
                .parse()
                .map_err(|msg| ProfileError::Malformed { line, msg })?;
            let alpha_k: usize = record[1].parse().map_err(|_| ProfileError::Malformed {
                line,
                msg: format!("alpha_k: `{}` is not a positive integer", &record[1]),
            })?;
            if alpha_k == 0 {
                return Err(ProfileError::OutOfRange {
                    line,
                    field: "alpha_k",
                    value: 0.0,
                });
            }
            let pct = parse_cell(line, "beta_m_percent", &record[2])?.ok_or_else(|| {
                ProfileError::Malformed {
                    line,
                    msg: "beta_m_percent is required".into(),
                }
            })?;
            let beta_m = SpatialBudget::from_percent(pct).ok_or(ProfileError::OutOfRange {
                line,
                field: "beta_m_percent",
                value: pct,
            })?;
            let time = |i: usize, field: &'static str| {
                check(line, field, parse_cell(line, field, &record[i])?, |x| x >= 0.0)
            };
            let entry = ProfileEntry {
                method,
                alpha_k,
                beta_m,
                t_fa_ms: time(3, "t_fa_ms")?,
                t_sa_ms: time(4, "t_sa_ms")?,
                t_fr_ms: time(5, "t_fr_ms")?,
                t_vit_ms: time(6, "t_vit_ms")?,
                t_ee_ms: time(7, "t_ee_ms")?,
                t_ed_ms: time(8, "t_ed_ms")?,
                entropy_bits: check(
                    line,
                    "entropy_bits",
                    parse_cell(line, "entropy_bits", &record[9])?,
                    |x| x > 0.0 && x <= 32.0,
                )?,
                accuracy_pct: check(
                    line,
                    "accuracy_pct",
                    parse_cell(line, "accuracy_pct", &record[10])?,
                    |x| (0.0..=100.0).contains(&x),
                )?,
                accuracy_spread: time(11, "accuracy_spread")?,
            };
            let key = (method, alpha_k, beta_m);
            if entries.contains_key(&key) {
                return Err(ProfileError::Duplicate {
                    line,
                    method,
                    alpha_k,
                    beta_m,
                });
            }
            entries.insert(key, entry);
        }
        Ok(Self {
            entries,
            local_inference_time_ms: DEFAULT_LOCAL_INFERENCE_MS,
        })
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = CSV_COLUMNS.join(",");
        out.push('\n');
        for e in self.entries.values() {
            let row = [
                e.method.to_string(),
                e.alpha_k.to_string(),
                e.beta_m.percent().to_string(),
                fmt_cell(e.t_fa_ms),
                fmt_cell(e.t_sa_ms),
                fmt_cell(e.t_fr_ms),
                fmt_cell(e.t_vit_ms),
                fmt_cell(e.t_ee_ms),
                fmt_cell(e.t_ed_ms),
                fmt_cell(e.entropy_bits),
                fmt_cell(e.accuracy_pct),
                fmt_cell(e.accuracy_spread),
            ];
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn with_local_inference_time(mut self, ms: f64) -> Result<Self, ProfileError> {
        if !ms.is_finite() || ms < 0.0 {
            return Err(ProfileError::LocalTime(ms));
        }
        self.local_inference_time_ms = ms;
        Ok(self)
    }

    pub fn local_inference_time_ms(&self) -> f64 {
        self.local_inference_time_ms
    }

    pub fn entries(&self) -> impl Iterator<Item = &ProfileEntry> {
        self.entries.values()
    }

    pub fn entry(&self, method: Method, alpha_k: usize, beta_m: SpatialBudget) -> Option<&ProfileEntry> {
        self.entries.get(&(method, alpha_k, beta_m))
    }

    pub fn is_tabulated(&self, method: Method, alpha_k: usize, beta_m: SpatialBudget) -> bool {
        self.entry(method, alpha_k, beta_m)
            .is_some_and(|e| e.accuracy_pct.is_some())
    }

    fn exact_terms(&self, e: &ProfileEntry) -> Result<CostTerms, ProfileError> {
        let need = |v: Option<f64>, field: &'static str| {
            v.ok_or(ProfileError::MissingField {
                method: e.method,
                alpha_k: e.alpha_k,
                beta_m: e.beta_m,
                field,
            })
        };
        // No spatial compression at full budget, so SA and FR never run.
        let (t_sa_ms, t_fr_ms) = if e.beta_m.is_full() {
            (0.0, 0.0)
        } else {
            (need(e.t_sa_ms, "t_sa_ms")?, need(e.t_fr_ms, "t_fr_ms")?)
        };
        let entropy = match (e.entropy_bits, e.t_ee_ms, e.t_ed_ms) {
            (Some(bits_per_element), Some(t_ee_ms), Some(t_ed_ms)) => Some(EntropyTerms {
                bits_per_element,
                t_ee_ms,
                t_ed_ms,
            }),
            _ => None,
        };
        Ok(CostTerms {
            t_fa_ms: need(e.t_fa_ms, "t_fa_ms")?,
            t_sa_ms,
            t_fr_ms,
            t_vit_ms: need(e.t_vit_ms, "t_vit_ms")?,
            entropy,
            accuracy_pct: need(e.accuracy_pct, "accuracy_pct")?,
            interpolated: false,
        })
    }

    /// Cost terms for a budget pair. Untabulated βm between two tabulated
    /// values of the same αk is linearly interpolated and flagged.
    pub fn terms(
        &self,
        method: Method,
        alpha_k: usize,
        beta_m: SpatialBudget,
    ) -> Result<CostTerms, ProfileError> {
        if let Some(e) = self.entry(method, alpha_k, beta_m) {
            return self.exact_terms(e);
        }
        let no_entry = ProfileError::NoEntry {
            method,
            alpha_k,
            beta_m,
        };
        let tabulated = || {
            self.entries
                .range((method, alpha_k, SpatialBudget::from_basis_points(1).unwrap())..=(method, alpha_k, SpatialBudget::FULL))
                .map(|(_, e)| e)
                .filter(|e| e.accuracy_pct.is_some())
        };
        let lo = tabulated().rev().find(|e| e.beta_m < beta_m);
        let hi = tabulated().find(|e| e.beta_m > beta_m);
        let (Some(lo), Some(hi)) = (lo, hi) else {
            return Err(no_entry);
        };
        let (a, b) = (self.exact_terms(lo)?, self.exact_terms(hi)?);
        let w = (beta_m.fraction() - lo.beta_m.fraction()) / (hi.beta_m.fraction() - lo.beta_m.fraction());
        let lerp = |x: f64, y: f64| x + (y - x) * w;
        // Below full budget SA and FR still run; the full-budget endpoint's
        // zeros say nothing about their cost.
        let (t_sa_ms, t_fr_ms) = if hi.beta_m.is_full() {
            (a.t_sa_ms, a.t_fr_ms)
        } else {
            (lerp(a.t_sa_ms, b.t_sa_ms), lerp(a.t_fr_ms, b.t_fr_ms))
        };
        let entropy = match (a.entropy, b.entropy) {
            (Some(x), Some(y)) => Some(EntropyTerms {
                bits_per_element: lerp(x.bits_per_element, y.bits_per_element),
                t_ee_ms: lerp(x.t_ee_ms, y.t_ee_ms),
                t_ed_ms: lerp(x.t_ed_ms, y.t_ed_ms),
            }),
            _ => None,
        };
        Ok(CostTerms {
            t_fa_ms: lerp(a.t_fa_ms, b.t_fa_ms),
            t_sa_ms,
            t_fr_ms,
            t_vit_ms: lerp(a.t_vit_ms, b.t_vit_ms),
            entropy,
            accuracy_pct: lerp(a.accuracy_pct, b.accuracy_pct),
            interpolated: true,
        })
    }

    /// αk values with at least one usable row for `method`.
    pub fn frame_budgets(&self, method: Method) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .entries
            .keys()
            .filter(|k| k.0 == method)
            .map(|k| k.1)
            .collect();
        v.dedup();
        v
    }

    /// Pairs where STAE's accuracy is not strictly above DeepISC's at the
    /// same budgets. Empty for the shipped tables.
    pub fn baseline_dominance_violations(&self) -> Vec<(usize, SpatialBudget)> {
        self.entries
            .values()
            .filter(|e| e.method == Method::Stae && !e.beta_m.is_full())
            .filter_map(|s| {
                let d = self.entry(Method::Deepisc, s.alpha_k, s.beta_m)?;
                match (s.accuracy_pct, d.accuracy_pct) {
                    (Some(a), Some(b)) if a <= b => Some((s.alpha_k, s.beta_m)),
                    _ => None,
                }
            })
            .collect()
    }
}
