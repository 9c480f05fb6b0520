//! Iterative multicalibration by category patching.
//!
//! Each sweep visits every category `g ∩ {v : bin(v) = b}` on the current
//! scores. Categories with at most `λ·α·|g|` members are skipped. For the
//! rest, `Δ = mean(y) − mean(v)`; when `|Δ| > α` every member moves by `Δ`
//! (clipped to `[0, 1]`) and the patch is logged. Fitting stops after a
//! sweep with no update, or at `max_sweeps`.

use serde::{Deserialize, Serialize};

use crate::data::{GroupCollection, ScoredDataset};
use crate::error::{Error, Result};
use crate::patch::{BinGrid, Patch, PatchedPredictor, Provenance, DEFAULT_LAMBDA};
use crate::rng::SplitMix64;
use crate::scalar::{clip_unit, Scalar};

/// Violation tolerances swept by the benchmark protocol.
pub const ALPHA_GRID: [f64; 4] = [0.1, 0.05, 0.025, 0.0125];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HkrrConfig {
    pub alpha: f64,
    pub lambda: f64,
    pub max_sweeps: usize,
    /// When set, category order is reshuffled every sweep.
    pub shuffle_seed: Option<u64>,
}

impl Default for HkrrConfig {
    fn default() -> Self {
        Self { alpha: 0.1, lambda: DEFAULT_LAMBDA, max_sweeps: 500, shuffle_seed: None }
    }
}

impl HkrrConfig {
    pub fn with_alpha(alpha: f64) -> Self {
        Self { alpha, ..Self::default() }
    }

    pub fn validate(&self) -> Result<BinGrid> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha {} must lie in (0, 1)", self.alpha)));
        }
        if self.max_sweeps == 0 {
            return Err(Error::Config("max_sweeps must be positive".into()));
        }
        BinGrid::from_width(self.lambda)
    }
}

pub fn hkrr_fit<T: Scalar>(
    calib: &ScoredDataset<T>,
    groups: &GroupCollection,
    cfg: &HkrrConfig,
) -> Result<PatchedPredictor<T>> {
    hkrr_fit_with_scores(calib, groups, cfg).map(|(p, _)| p)
}

/// [`hkrr_fit`], also returning the calibration scores as they stand at the end of fitting.
pub fn hkrr_fit_with_scores<T: Scalar>(
    calib: &ScoredDataset<T>,
    groups: &GroupCollection,
    cfg: &HkrrConfig,
) -> Result<(PatchedPredictor<T>, Vec<T>)> {
    let grid = cfg.validate()?;
    groups.check_matches(calib.len())?;
    let members = groups.member_lists();
    let labels = calib.label_values();
    let mut scores = calib.scores();
    let alpha = T::of(cfg.alpha);
    let lambda = T::of(cfg.lambda);

    let mut categories: Vec<(usize, usize)> =
        (0..members.len()).flat_map(|g| (0..grid.bins()).map(move |b| (g, b))).collect();
    let mut rng = cfg.shuffle_seed.map(SplitMix64::new);

    let mut patches = Vec::new();
    let mut converged = false;
    let mut in_category: Vec<usize> = Vec::new();
    for _ in 0..cfg.max_sweeps {
        if let Some(rng) = rng.as_mut() {
            rng.shuffle(&mut categories);
        }
        let mut updated = false;
        for &(g, b) in &categories {
            let group = &members[g];
            in_category.clear();
            in_category.extend(group.iter().copied().filter(|&i| grid.index(scores[i]) == b));
            let mass_floor = lambda * alpha * T::of_usize(group.len());
            if !(T::of_usize(in_category.len()) > mass_floor) {
                continue;
            }
            let count = T::of_usize(in_category.len());
            let residual: T = in_category.iter().map(|&i| labels[i] - scores[i]).sum();
            let delta = residual / count;
            if delta.abs() > alpha {
                for &i in &in_category {
                    scores[i] = clip_unit(scores[i] + delta);
                }
                patches.push(Patch { group_index: g, bin_index: b, shift: delta });
                updated = true;
            }
        }
        if !updated {
            converged = true;
            break;
        }
    }

    let mut provenance = Provenance::new("hkrr").param("alpha", cfg.alpha).param("lambda", cfg.lambda);
    if let Some(seed) = cfg.shuffle_seed {
        provenance = provenance.param("shuffle_seed", seed);
    }
    Ok((PatchedPredictor { lambda, patches, provenance, converged }, scores))
}
