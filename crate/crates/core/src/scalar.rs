//! Floating-point abstraction shared by every numeric module.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real scalar used for scores, residuals and metric values.
///
/// Implemented for `f32` and `f64`. The crate root re-exports `f64`
/// aliases for the common case.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Converts an `f64` literal. Never fails for finite inputs.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Tolerance used when checking that a weight vector sums to one.
    fn simplex_tolerance() -> Self {
        let eps = Self::epsilon() * Self::of(100.0);
        eps.max(Self::of(1e-9))
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Clamps `x` to the unit interval.
#[inline]
pub fn clip_unit<T: Scalar>(x: T) -> T {
    x.max(T::zero()).min(T::one())
}

#[inline]
pub fn sigmoid<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

/// Probability clamp applied before taking logs or logits.
pub const PROB_CLAMP: f64 = 1e-6;

/// `ln(p / (1 - p))` with `p` clamped to `[1e-6, 1 - 1e-6]`.
#[inline]
pub fn logit<T: Scalar>(p: T) -> T {
    let lo = T::of(PROB_CLAMP);
    let p = p.max(lo).min(T::one() - lo);
    (p / (T::one() - p)).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_logit_roundtrip() {
        for &p in &[0.01f64, 0.2, 0.5, 0.77, 0.999] {
            assert!((sigmoid(logit(p)) - p).abs() < 1e-12);
        }
        assert!((logit(0.0f64) - (1e-6f64 / (1.0 - 1e-6)).ln()).abs() < 1e-12);
    }

    #[test]
    fn sigmoid_extremes_are_finite() {
        assert_eq!(sigmoid(-800.0f64), 0.0);
        assert_eq!(sigmoid(800.0f64), 1.0);
        assert!(sigmoid(-80.0f32) >= 0.0);
    }

    #[test]
    fn simplex_tolerance_scales_with_precision() {
        assert_eq!(f64::simplex_tolerance(), 1e-9);
        assert!(f32::simplex_tolerance() > 1e-6);
    }
}
