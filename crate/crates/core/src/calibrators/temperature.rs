use serde::{Deserialize, Serialize};

use super::logit_loss;
use crate::data::ScoredDataset;
use crate::error::{Error, Result};
use crate::scalar::{sigmoid, Scalar};

/// Calibrated score `sigmoid(logit / t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemperatureParams<T> {
    pub t: T,
}

impl<T: Scalar> TemperatureParams<T> {
    #[inline]
    pub fn apply_logit(&self, z: T) -> T {
        sigmoid(z / self.t)
    }
}

/// Fixed divisors `{0.2·k : k = 1..20}`.
pub fn temperature_grid<T: Scalar>() -> Vec<T> {
    (1..=20).map(|k| T::of_usize(k) / T::of(5.0)).collect()
}

fn loss_at<T: Scalar>(t: T, z: &[T], labels: &[bool]) -> T {
    logit_loss(z.iter().map(|&zi| zi / t), labels)
}

/// Golden-section search for the loss-minimizing divisor over `ln t ∈ [ln 0.01, ln 100]`.
fn continuous_optimum<T: Scalar>(z: &[T], labels: &[bool]) -> T {
    let inv_phi = T::of((5f64.sqrt() - 1.0) / 2.0);
    let (mut a, mut b) = (T::of(0.01f64.ln()), T::of(100f64.ln()));
    let tol = T::of(1e-6);
    let f = |u: T| loss_at(u.exp(), z, labels);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    ((a + b) * T::of(0.5)).exp()
}

/// Picks the divisor with least calibration-set log loss among the fixed
/// grid and the continuous optimum.
pub fn temperature_fit<T: Scalar>(calib: &ScoredDataset<T>) -> Result<TemperatureParams<T>> {
    if !calib.has_both_classes() {
        return Err(Error::Fit("temperature scaling needs both label classes".into()));
    }
    let z = calib.logits();
    let labels = calib.labels();
    let mut candidates = temperature_grid::<T>();
    candidates.push(continuous_optimum(&z, &labels));
    let mut best = candidates[0];
    let mut best_loss = loss_at(best, &z, &labels);
    for &t in &candidates[1..] {
        let l = loss_at(t, &z, &labels);
        if l < best_loss {
            best = t;
            best_loss = l;
        }
    }
    Ok(TemperatureParams { t: best })
}
