//! Frame and spatial budgets and the pre-defined sets they are drawn from.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Fraction of pixel positions kept per frame, stored in basis points
/// (1/10000) so pixel counts floor exactly in integer arithmetic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct SpatialBudget(u16);

impl SpatialBudget {
    pub const FULL: SpatialBudget = SpatialBudget(10_000);

    pub fn from_basis_points(bp: u16) -> Option<Self> {
        (1..=10_000).contains(&bp).then_some(Self(bp))
    }

    /// `fraction` in (0, 1], rounded to the nearest basis point.
    pub fn from_fraction(fraction: f64) -> Option<Self> {
        if !fraction.is_finite() {
            return None;
        }
        let bp = (fraction * 10_000.0).round();
        if !(1.0..=10_000.0).contains(&bp) {
            return None;
        }
        Self::from_basis_points(bp as u16)
    }

    pub fn from_percent(percent: f64) -> Option<Self> {
        Self::from_fraction(percent / 100.0)
    }

    pub fn basis_points(self) -> u16 {
        self.0
    }

    pub fn fraction(self) -> f64 {
        self.0 as f64 / 10_000.0
    }

    pub fn percent(self) -> f64 {
        self.0 as f64 / 100.0
    }

    pub fn is_full(self) -> bool {
        self.0 == 10_000
    }

    /// ⌊β·H·W⌋ pixel positions.
    pub fn pixels(self, height: usize, width: usize) -> usize {
        (self.0 as u128 * (height * width) as u128 / 10_000) as usize
    }
}

impl fmt::Display for SpatialBudget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}%", self.percent())
    }
}

impl TryFrom<f64> for SpatialBudget {
    type Error = String;
    fn try_from(v: f64) -> Result<Self, Self::Error> {
        Self::from_fraction(v).ok_or_else(|| format!("spatial budget {v} outside (0, 1]"))
    }
}

impl From<SpatialBudget> for f64 {
    fn from(b: SpatialBudget) -> f64 {
        b.fraction()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BudgetPair {
    pub alpha_k: usize,
    pub beta_m: SpatialBudget,
}

impl BudgetPair {
    pub fn new(alpha_k: usize, beta_m: SpatialBudget) -> Self {
        Self { alpha_k, beta_m }
    }
}

/// The frame budget set A and spatial budget set B.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BudgetSets {
    pub frames: Vec<usize>,
    pub spatial: Vec<SpatialBudget>,
}

impl Default for BudgetSets {
    fn default() -> Self {
        Self {
            frames: vec![1, 2, 4, 8, 16],
            spatial: [100u16, 90, 80, 70, 60, 50, 40]
                .iter()
                .map(|p| SpatialBudget(p * 100))
                .collect(),
        }
    }
}

impl BudgetSets {
    pub fn is_empty(&self) -> bool {
        self.frames.is_empty() || self.spatial.is_empty()
    }

    pub fn contains(&self, pair: BudgetPair) -> bool {
        self.frames.contains(&pair.alpha_k) && self.spatial.contains(&pair.beta_m)
    }

    pub fn pairs(&self) -> impl Iterator<Item = BudgetPair> + '_ {
        self.frames.iter().flat_map(move |&a| {
            self.spatial
                .iter()
                .map(move |&b| BudgetPair::new(a, b))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pixel_counts_floor_exactly() {
        let b = SpatialBudget::from_fraction(0.4).unwrap();
        assert_eq!(b.pixels(224, 224), 20_070);
        assert_eq!(b.pixels(8, 8), 25);
        assert_eq!(SpatialBudget::FULL.pixels(224, 224), 50_176);
        // 0.29·100 is 28.999… in binary floating point
        assert_eq!(SpatialBudget::from_fraction(0.29).unwrap().pixels(10, 10), 29);
    }

    #[test]
    fn out_of_range_budgets_rejected() {
        assert!(SpatialBudget::from_fraction(0.0).is_none());
        assert!(SpatialBudget::from_fraction(1.01).is_none());
        assert!(SpatialBudget::from_fraction(f64::NAN).is_none());
        assert!(SpatialBudget::from_percent(100.0).unwrap().is_full());
    }

    #[test]
    fn default_sets() {
        let s = BudgetSets::default();
        assert_eq!(s.pairs().count(), 35);
        assert!(s.contains(BudgetPair::new(4, SpatialBudget::from_percent(40.0).unwrap())));
        assert!(!s.contains(BudgetPair::new(3, SpatialBudget::FULL)));
    }
}
