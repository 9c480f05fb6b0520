//! Standard single-population recalibration maps.

mod isotonic;
mod platt;
mod temperature;

pub use isotonic::{isotonic_fit, IsotonicMap};
pub use platt::{platt_fit, PlattParams};
pub use temperature::{temperature_fit, temperature_grid, TemperatureParams};

use serde::{Deserialize, Serialize};

use crate::data::ScoredDataset;
use crate::error::Result;
use crate::patch::PatchedPredictor;
use crate::scalar::Scalar;

/// Mean log loss of `sigmoid(u_i)` written in the overflow-free softplus form.
pub(crate) fn logit_loss<T: Scalar>(logits: impl Iterator<Item = T>, labels: &[bool]) -> T {
    let mut total = T::zero();
    for (u, &l) in logits.zip(labels) {
        let softplus = u.max(T::zero()) + (-u.abs()).exp().ln_1p();
        total = total + if l { softplus - u } else { softplus };
    }
    total / T::of_usize(labels.len())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibratorKind {
    Platt,
    Isotonic,
    Temperature,
}

impl CalibratorKind {
    pub fn fit<T: Scalar>(self, calib: &ScoredDataset<T>) -> Result<FittedCalibrator<T>> {
        Ok(match self {
            CalibratorKind::Platt => FittedCalibrator::Platt(platt_fit(calib)?),
            CalibratorKind::Isotonic => FittedCalibrator::Isotonic(isotonic_fit(calib)),
            CalibratorKind::Temperature => FittedCalibrator::Temperature(temperature_fit(calib)?),
        })
    }
}

/// Any fitted post-processor, ready to be applied to new samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FittedCalibrator<T> {
    Identity,
    Platt(PlattParams<T>),
    Isotonic(IsotonicMap<T>),
    Temperature(TemperatureParams<T>),
    Patched(PatchedPredictor<T>),
}

impl<T: Scalar> FittedCalibrator<T> {
    pub fn apply(&self, dataset: &ScoredDataset<T>) -> Result<Vec<T>> {
        Ok(match self {
            FittedCalibrator::Identity => dataset.scores(),
            FittedCalibrator::Platt(p) => dataset.logits().into_iter().map(|z| p.apply_logit(z)).collect(),
            FittedCalibrator::Isotonic(m) => dataset.scores().into_iter().map(|v| m.apply(v)).collect(),
            FittedCalibrator::Temperature(t) => dataset.logits().into_iter().map(|z| t.apply_logit(z)).collect(),
            FittedCalibrator::Patched(p) => p.predict(dataset)?,
        })
    }

    pub fn patch_count(&self) -> usize {
        match self {
            FittedCalibrator::Patched(p) => p.patches.len(),
            _ => 0,
        }
    }
}
