//! No-regret online update rules.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{clip_unit, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OnlineAlgorithm {
    Hedge,
    Prod,
    OptimisticHedge,
    GradientDescent,
}

fn check_simplex<T: Scalar>(weights: &[T]) -> Result<()> {
    let sum: T = weights.iter().copied().sum();
    if weights.is_empty()
        || weights.iter().any(|&w| !(w >= T::zero()))
        || (sum - T::one()).abs() > T::simplex_tolerance()
    {
        return Err(Error::Argument(format!("weights are not on the simplex (sum {sum})")));
    }
    Ok(())
}

/// One step of `alg` on `state` with gains `feedback`.
///
/// - `Hedge`: `w_j ∝ w_j · exp(η f_j)`.
/// - `Prod`: `w_j ∝ w_j · (1 + η f_j)`, `f_j` clipped below at `−1/(2η)`.
/// - `OptimisticHedge`: hedge on `2 f_t − f_{t−1}`; a missing previous
///   feedback counts as zero.
/// - `GradientDescent`: `state` holds scores, `v_i ← clip(v_i + η f_i)`.
///
/// Weight states must lie on the simplex. Uniform feedback leaves weights
/// untouched.
pub fn online_update<T: Scalar>(
    state: &mut [T],
    feedback: &[T],
    previous: Option<&[T]>,
    alg: OnlineAlgorithm,
    eta: T,
) -> Result<()> {
    if state.len() != feedback.len() || previous.is_some_and(|p| p.len() != feedback.len()) {
        return Err(Error::Argument("state and feedback lengths differ".into()));
    }
    if !(eta > T::zero()) {
        return Err(Error::Argument(format!("learning rate {eta} must be positive")));
    }
    if alg == OnlineAlgorithm::GradientDescent {
        for (v, &f) in state.iter_mut().zip(feedback) {
            *v = clip_unit(*v + eta * f);
        }
        return Ok(());
    }
    check_simplex(state)?;

    let two = T::of(2.0);
    let effective = |j: usize| match (alg, previous) {
        (OnlineAlgorithm::OptimisticHedge, Some(p)) => two * feedback[j] - p[j],
        (OnlineAlgorithm::OptimisticHedge, None) => two * feedback[j],
        _ => feedback[j],
    };
    let first = effective(0);
    if (1..state.len()).all(|j| effective(j) == first) {
        return Ok(());
    }

    match alg {
        OnlineAlgorithm::Hedge | OnlineAlgorithm::OptimisticHedge => {
            let top = (0..state.len()).map(effective).fold(T::neg_infinity(), T::max);
            for (j, w) in state.iter_mut().enumerate() {
                *w = *w * (eta * (effective(j) - top)).exp();
            }
        }
        OnlineAlgorithm::Prod => {
            let floor = -T::one() / (two * eta);
            for (j, w) in state.iter_mut().enumerate() {
                *w = *w * (T::one() + eta * effective(j).max(floor));
            }
        }
        OnlineAlgorithm::GradientDescent => unreachable!(),
    }
    let total: T = state.iter().copied().sum();
    if !(total > T::zero()) {
        return Err(Error::Argument("multiplicative update collapsed all weight".into()));
    }
    state.iter_mut().for_each(|w| *w = *w / total);
    Ok(())
}
