//! Score bins, category patches and patch-log replay.
//!
//! Bins are `[0, λ), [λ, 2λ), …, [1 − λ, 1]`: half-open except the last,
//! which also holds 1.0. Every module shares this partition.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::{GroupMask, ScoredDataset};
use crate::error::{Error, Result};
use crate::scalar::{clip_unit, Scalar};

/// Default bin width.
pub const DEFAULT_LAMBDA: f64 = 0.1;

/// Equal-width partition of `[0, 1]` into `1/λ` bins.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BinGrid {
    bins: usize,
}

impl BinGrid {
    /// Fails unless `1/lambda` is an integer (within 1e-9).
    pub fn from_width<T: Scalar>(lambda: T) -> Result<Self> {
        let tol = (T::epsilon().to_f64_lossy() * 4.0).max(1e-9);
        let lambda = lambda.to_f64_lossy();
        if !(lambda > 0.0 && lambda <= 1.0) {
            return Err(Error::Config(format!("bin width {lambda} must lie in (0, 1]")));
        }
        let inv = 1.0 / lambda;
        let bins = inv.round();
        if (inv - bins).abs() > tol * bins.max(1.0) {
            return Err(Error::Config(format!("bin width {lambda} does not divide 1")));
        }
        Ok(Self { bins: bins as usize })
    }

    pub fn with_bins(bins: usize) -> Self {
        assert!(bins > 0);
        Self { bins }
    }

    pub fn bins(self) -> usize {
        self.bins
    }

    pub fn width<T: Scalar>(self) -> T {
        T::one() / T::of_usize(self.bins)
    }

    /// `floor(score * bins)`, with 1.0 folded into the last bin.
    ///
    /// Multiplying by the integer bin count (rather than dividing by λ) keeps
    /// decimal edges such as 0.3 in the bin they open.
    #[inline]
    pub fn index<T: Scalar>(self, score: T) -> usize {
        let x = (score * T::of_usize(self.bins)).floor();
        let b = x.to_usize().unwrap_or(0);
        b.min(self.bins - 1)
    }

    /// Bin midpoints `λ/2, 3λ/2, …, 1 − λ/2`.
    pub fn centers<T: Scalar>(self) -> Vec<T> {
        let n = T::of_usize(self.bins);
        (0..self.bins).map(|b| (T::of_usize(2 * b + 1)) / (n + n)).collect()
    }
}

/// Bin of `score` for width `lambda`.
pub fn bin_index<T: Scalar>(score: T, lambda: T) -> Result<usize> {
    if !(score >= T::zero() && score <= T::one()) {
        return Err(Error::Argument(format!("score {score} outside [0, 1]")));
    }
    Ok(BinGrid::from_width(lambda)?.index(score))
}

/// Additive correction applied to one category (group ∩ score bin).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Patch<T> {
    pub group_index: usize,
    pub bin_index: usize,
    pub shift: T,
}

/// Which fitting procedure produced a predictor, with its hyperparameters.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub method: String,
    pub params: BTreeMap<String, String>,
}

impl Provenance {
    pub fn new(method: impl Into<String>) -> Self {
        Self { method: method.into(), params: BTreeMap::new() }
    }

    pub fn param(mut self, key: &str, value: impl ToString) -> Self {
        self.params.insert(key.to_string(), value.to_string());
        self
    }
}

/// Base scores plus an ordered log of category patches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchedPredictor<T> {
    pub lambda: T,
    pub patches: Vec<Patch<T>>,
    pub provenance: Provenance,
    /// False when fitting stopped at an iteration cap.
    pub converged: bool,
}

impl<T: Scalar> PatchedPredictor<T> {
    pub fn identity(lambda: T) -> Self {
        Self { lambda, patches: Vec::new(), provenance: Provenance::new("identity"), converged: true }
    }

    pub fn grid(&self) -> Result<BinGrid> {
        BinGrid::from_width(self.lambda)
    }

    /// Replays the log on one base score.
    ///
    /// A patch fires when the sample is in its group and the *current*
    /// (partially patched) value lies in its bin; the result is clipped
    /// after every step.
    pub fn apply_patches(&self, base_score: T, groups: GroupMask) -> T {
        let grid = match self.grid() {
            Ok(g) => g,
            Err(_) => return base_score,
        };
        replay(grid, &self.patches, base_score, groups)
    }

    /// Replays the log on every sample of `dataset`.
    pub fn predict(&self, dataset: &ScoredDataset<T>) -> Result<Vec<T>> {
        let grid = self.grid()?;
        Ok(dataset.samples().iter().map(|s| replay(grid, &self.patches, s.score, s.groups)).collect())
    }

    /// The predictor formed by the first `k` patches.
    pub fn truncated(&self, k: usize) -> Self {
        Self { patches: self.patches[..k.min(self.patches.len())].to_vec(), ..self.clone() }
    }
}

#[inline]
pub(crate) fn replay<T: Scalar>(grid: BinGrid, patches: &[Patch<T>], base: T, groups: GroupMask) -> T {
    let mut v = base;
    for p in patches {
        if groups.contains(p.group_index) && grid.index(v) == p.bin_index {
            v = clip_unit(v + p.shift);
        }
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bin_index_edges() {
        assert_eq!(bin_index(0.0f64, 0.1).unwrap(), 0);
        assert_eq!(bin_index(0.95f64, 0.1).unwrap(), 9);
        assert_eq!(bin_index(1.0f64, 0.1).unwrap(), 9);
        assert_eq!(bin_index(0.3f64, 0.1).unwrap(), 3);
        assert_eq!(bin_index(0.7f64, 0.1).unwrap(), 7);
        assert_eq!(bin_index(0.5f32, 0.25).unwrap(), 2);
    }

    #[test]
    fn decimal_edges_open_their_bin() {
        let grid = BinGrid::with_bins(10);
        for k in 0..10 {
            assert_eq!(grid.index(k as f64 / 10.0), k);
        }
    }

    #[test]
    fn bin_width_must_divide_one() {
        assert!(matches!(bin_index(0.5f64, 0.3), Err(Error::Config(_))));
        assert!(BinGrid::from_width(0.0f64).is_err());
        assert_eq!(BinGrid::from_width(0.05f64).unwrap().bins(), 20);
    }

    #[test]
    fn centers_are_bin_midpoints() {
        let c: Vec<f64> = BinGrid::with_bins(10).centers();
        assert_eq!(c.len(), 10);
        assert!((c[0] - 0.05).abs() < 1e-15 && (c[9] - 0.95).abs() < 1e-15);
    }

    fn predictor(patches: Vec<Patch<f64>>) -> PatchedPredictor<f64> {
        PatchedPredictor { patches, ..PatchedPredictor::identity(0.1) }
    }

    #[test]
    fn replay_examples() {
        let g0 = GroupMask::from_indices([0]);
        assert_eq!(predictor(vec![]).apply_patches(0.37, g0), 0.37);
        let p = predictor(vec![Patch { group_index: 0, bin_index: 3, shift: 0.58 }]);
        assert!((p.apply_patches(0.32, g0) - 0.90).abs() < 1e-12);
        assert_eq!(p.apply_patches(0.32, GroupMask::EMPTY), 0.32);
        let clip = predictor(vec![Patch { group_index: 0, bin_index: 9, shift: 0.5 }]);
        assert_eq!(clip.apply_patches(0.95, g0), 1.0);
    }

    #[test]
    fn replay_uses_partially_patched_value() {
        let g0 = GroupMask::from_indices([0]);
        let p = predictor(vec![
            Patch { group_index: 0, bin_index: 3, shift: 0.2 },
            Patch { group_index: 0, bin_index: 5, shift: 0.1 },
        ]);
        assert!((p.apply_patches(0.35, g0) - 0.65).abs() < 1e-12);
        let swapped = predictor(vec![p.patches[1], p.patches[0]]);
        assert!((swapped.apply_patches(0.35, g0) - 0.55).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn bins_partition_unit_interval(scores in prop::collection::vec(0.0f64..=1.0, 1..200)) {
            let grid = BinGrid::with_bins(10);
            let mut counts = vec![0usize; 10];
            for &s in &scores {
                let b = grid.index(s);
                prop_assert!(b < 10);
                prop_assert!(s >= b as f64 / 10.0 - 1e-12);
                counts[b] += 1;
            }
            prop_assert_eq!(counts.iter().sum::<usize>(), scores.len());
        }

        #[test]
        fn replay_stays_in_unit_interval(
            base in 0.0f64..=1.0,
            raw in prop::collection::vec((0usize..3, 0usize..10, -1.0f64..=1.0), 0..30),
            bits in 0u8..8,
        ) {
            let patches = raw.into_iter()
                .map(|(g, b, s)| Patch { group_index: g, bin_index: b, shift: s })
                .collect();
            let mask = GroupMask::from_indices((0..3).filter(|i| bits >> i & 1 == 1));
            let v = predictor(patches).apply_patches(base, mask);
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }
}
