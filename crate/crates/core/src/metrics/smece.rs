//! Smoothed expected calibration error.
//!
//! Residuals `r_i = y_i − v_i` are spread with a Gaussian kernel reflected at
//! 0 and 1 (the Neumann heat kernel on the unit interval, truncated to a few
//! images), then `smECE_σ = (1/n) ∫ |Σ_i K_σ(t, v_i) r_i| dt`. The reported
//! value is taken at the bandwidth fixed point `σ* = smECE_{σ*}`.
//!
//! Evaluation is discretized on a uniform grid of `grid_points` nodes:
//! residuals are split linearly between the two nearest nodes, each node's
//! kernel column is normalized to unit trapezoid mass, and the outer
//! integral is a trapezoid sum over the same grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Reflection images kept on each side of the interval.
const IMAGES: i32 = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmEceConfig {
    pub grid_points: usize,
    pub fixpoint_tolerance: f64,
    pub sigma_bounds: (f64, f64),
}

impl Default for SmEceConfig {
    fn default() -> Self {
        Self { grid_points: 513, fixpoint_tolerance: 1e-4, sigma_bounds: (1e-3, 1.0) }
    }
}

impl SmEceConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.sigma_bounds;
        if self.grid_points < 3 {
            return Err(Error::Config(format!("grid_points {} < 3", self.grid_points)));
        }
        if !(lo > 0.0 && lo < hi) {
            return Err(Error::Config(format!("sigma bounds ({lo}, {hi}) must be positive and ordered")));
        }
        if !(self.fixpoint_tolerance > 0.0) {
            return Err(Error::Config("fixpoint_tolerance must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmEce<T> {
    pub value: T,
    pub sigma: T,
    /// False when the fixed point fell outside `sigma_bounds` and a
    /// boundary value was returned instead.
    pub converged: bool,
}

/// Residual mass at each grid node.
fn node_masses<T: Scalar>(scores: &[T], labels: &[bool], nodes: usize) -> Vec<T> {
    let last = nodes - 1;
    let scale = T::of_usize(last);
    let mut mass = vec![T::zero(); nodes];
    for (&v, &l) in scores.iter().zip(labels) {
        let r = if l { T::one() - v } else { -v };
        let x = (v * scale).max(T::zero()).min(scale);
        let j = x.floor().to_usize().unwrap_or(0).min(last);
        let frac = x - T::of_usize(j);
        if j == last || frac == T::zero() {
            mass[j] = mass[j] + r;
        } else {
            mass[j] = mass[j] + r * (T::one() - frac);
            mass[j + 1] = mass[j + 1] + r * frac;
        }
    }
    mass
}

/// `Σ_k exp(−(x − 2k)² / 2σ²)` for `x = s·h`, `s = 0..len`.
fn image_table<T: Scalar>(len: usize, h: T, sigma: T) -> Vec<T> {
    let two = T::of(2.0);
    let denom = two * sigma * sigma;
    (0..len)
        .map(|s| {
            let x = T::of_usize(s) * h;
            (-IMAGES..=IMAGES)
                .map(|k| {
                    let d = x - two * T::of(k as f64);
                    (-(d * d) / denom).exp()
                })
                .sum()
        })
        .collect()
}

fn smooth_integral<T: Scalar>(mass: &[T], n: usize, sigma: T) -> T {
    let nodes = mass.len();
    let h = T::one() / T::of_usize(nodes - 1);
    let half = T::of(0.5);
    // K(t_i, t_j) = direct[|i − j|] + reflected[i + j]
    let direct = image_table(nodes, h, sigma);
    let reflected = image_table(2 * nodes - 1, h, sigma);
    let mut num = vec![T::zero(); nodes];
    let mut column = vec![T::zero(); nodes];
    for (j, &m) in mass.iter().enumerate() {
        if m == T::zero() {
            continue;
        }
        for (i, c) in column.iter_mut().enumerate() {
            *c = direct[i.abs_diff(j)] + reflected[i + j];
        }
        let z = trapezoid(&column, h, half);
        if !(z > T::zero()) {
            continue;
        }
        let w = m / z;
        for (acc, &c) in num.iter_mut().zip(&column) {
            *acc = *acc + w * c;
        }
    }
    let abs: Vec<T> = num.iter().map(|v| v.abs()).collect();
    trapezoid(&abs, h, half) / T::of_usize(n)
}

fn trapezoid<T: Scalar>(values: &[T], h: T, half: T) -> T {
    let last = values.len() - 1;
    let inner: T = values.iter().copied().sum();
    h * (inner - half * (values[0] + values[last]))
}

/// `smECE_σ` at a fixed bandwidth.
pub fn smece_at_bandwidth<T: Scalar>(scores: &[T], labels: &[bool], sigma: T, cfg: &SmEceConfig) -> Result<T> {
    super::check_lengths(scores, labels)?;
    cfg.validate()?;
    if !(sigma > T::zero()) {
        return Err(Error::Argument(format!("bandwidth {sigma} must be positive")));
    }
    let mass = node_masses(scores, labels, cfg.grid_points);
    Ok(smooth_integral(&mass, scores.len(), sigma))
}

/// Smoothed ECE at the bandwidth fixed point, found by bisection on `σ`.
pub fn smece<T: Scalar>(scores: &[T], labels: &[bool], cfg: &SmEceConfig) -> Result<SmEce<T>> {
    super::check_lengths(scores, labels)?;
    cfg.validate()?;
    let n = scores.len();
    let mass = node_masses(scores, labels, cfg.grid_points);
    let f = |s: T| smooth_integral(&mass, n, s);

    let (mut lo, mut hi) = (T::of(cfg.sigma_bounds.0), T::of(cfg.sigma_bounds.1));
    let f_lo = f(lo);
    if f_lo <= lo {
        return Ok(SmEce { value: f_lo, sigma: lo, converged: false });
    }
    let f_hi = f(hi);
    if f_hi >= hi {
        return Ok(SmEce { value: f_hi, sigma: hi, converged: false });
    }
    let tol = T::of(cfg.fixpoint_tolerance);
    let half = T::of(0.5);
    while hi - lo > tol {
        let mid = (lo + hi) * half;
        if f(mid) > mid {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let sigma = (lo + hi) * half;
    Ok(SmEce { value: f(sigma), sigma, converged: true })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictor_is_zero() {
        let r = smece(&[0.0f64, 1.0, 1.0, 0.0], &[false, true, true, false], &SmEceConfig::default()).unwrap();
        assert!(r.value <= 1e-4);
    }

    #[test]
    fn constant_predictor_closed_form() {
        let r = smece(&[0.5f64; 4], &[true, true, true, false], &SmEceConfig::default()).unwrap();
        assert!((r.value - 0.25).abs() < 1e-6, "{r:?}");
        assert!(r.converged);
        assert!((r.sigma - 0.25).abs() < 1e-4);
        // off-node constant score
        let r = smece(&[0.37f64; 5], &[true, false, false, false, false], &SmEceConfig::default()).unwrap();
        assert!((r.value - 0.17).abs() < 1e-6, "{r:?}");
    }

    #[test]
    fn constant_residual_is_bandwidth_independent() {
        let cfg = SmEceConfig::default();
        for &s in &[0.01f64, 0.1, 0.7] {
            let v = smece_at_bandwidth(&[0.2f64; 10], &[true, true, true, true, true, false, false, false, false, false], s, &cfg)
                .unwrap();
            assert!((v - 0.3).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(smece::<f64>(&[], &[], &SmEceConfig::default()).is_err());
        let cfg = SmEceConfig { grid_points: 2, ..Default::default() };
        assert!(smece(&[0.5f64], &[true], &cfg).is_err());
        let cfg = SmEceConfig { sigma_bounds: (0.5, 0.1), ..Default::default() };
        assert!(smece(&[0.5f64], &[true], &cfg).is_err());
    }

    #[test]
    fn generic_over_f32() {
        let r = smece(&[0.5f32; 4], &[true, true, true, false], &SmEceConfig::default()).unwrap();
        assert!((r.value - 0.25).abs() < 1e-4);
    }

    #[test]
    fn decreasing_in_bandwidth_on_mixed_residuals() {
        let scores = [0.1f64, 0.15, 0.8, 0.85, 0.5];
        let labels = [true, true, false, false, true];
        let cfg = SmEceConfig::default();
        let a = smece_at_bandwidth(&scores, &labels, 0.01, &cfg).unwrap();
        let b = smece_at_bandwidth(&scores, &labels, 0.5, &cfg).unwrap();
        assert!(a > b);
    }
}
