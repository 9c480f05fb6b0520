use serde::{Deserialize, Serialize};

use super::logit_loss;
use crate::data::ScoredDataset;
use crate::error::{Error, Result};
use crate::scalar::{sigmoid, Scalar};

const MAX_ITERATIONS: usize = 100;
const GRADIENT_TOLERANCE: f64 = 1e-8;

/// `sigmoid(a · logit + b)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlattParams<T> {
    pub a: T,
    pub b: T,
}

impl<T: Scalar> PlattParams<T> {
    pub fn identity() -> Self {
        Self { a: T::one(), b: T::zero() }
    }

    #[inline]
    pub fn apply_logit(&self, z: T) -> T {
        sigmoid(self.a * z + self.b)
    }

    pub fn loss(&self, logits: &[T], labels: &[bool]) -> T {
        logit_loss(logits.iter().map(|&z| self.a * z + self.b), labels)
    }
}

/// Fits slope and intercept on logits by damped Newton iterations.
pub fn platt_fit<T: Scalar>(calib: &ScoredDataset<T>) -> Result<PlattParams<T>> {
    if !calib.has_both_classes() {
        return Err(Error::Fit("Platt scaling needs both label classes".into()));
    }
    let z = calib.logits();
    let labels = calib.labels();
    let n = T::of_usize(z.len());
    let tol = T::of(GRADIENT_TOLERANCE);
    let half = T::of(0.5);

    let mut params = PlattParams::identity();
    let mut loss = params.loss(&z, &labels);
    for _ in 0..MAX_ITERATIONS {
        let (mut ga, mut gb, mut haa, mut hab, mut hbb) = (T::zero(), T::zero(), T::zero(), T::zero(), T::zero());
        for (&zi, &l) in z.iter().zip(&labels) {
            let p = params.apply_logit(zi);
            let r = p - if l { T::one() } else { T::zero() };
            let w = p * (T::one() - p);
            ga = ga + r * zi;
            gb = gb + r;
            haa = haa + w * zi * zi;
            hab = hab + w * zi;
            hbb = hbb + w;
        }
        let (ga, gb, haa, hab, hbb) = (ga / n, gb / n, haa / n, hab / n, hbb / n);
        if (ga * ga + gb * gb).sqrt() <= tol {
            break;
        }
        // Ridge keeps the system solvable when all logits coincide.
        let ridge = T::of(1e-10) * (T::one() + haa + hbb);
        let (haa, hbb) = (haa + ridge, hbb + ridge);
        let det = haa * hbb - hab * hab;
        let (da, db) = if det > T::zero() {
            ((hbb * ga - hab * gb) / det, (haa * gb - hab * ga) / det)
        } else {
            (ga, gb)
        };
        let mut step = T::one();
        let mut improved = false;
        for _ in 0..40 {
            let cand = PlattParams { a: params.a - step * da, b: params.b - step * db };
            let cand_loss = cand.loss(&z, &labels);
            if cand_loss <= loss {
                params = cand;
                loss = cand_loss;
                improved = true;
                break;
            }
            step = step * half;
        }
        if !improved {
            break;
        }
    }
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ScoredSample;
    use crate::metrics::cross_entropy;
    use crate::rng::SplitMix64;

    fn from_logits(z: &[f64], y: &[bool]) -> ScoredDataset<f64> {
        let samples = z.iter().zip(y).map(|(&z, &y)| ScoredSample::new(sigmoid(z), y).with_logit(z)).collect();
        ScoredDataset::new(samples, vec![]).unwrap()
    }

    #[test]
    fn constant_logits_balanced_labels_give_half() {
        let d = from_logits(&[1.3; 6], &[true, false, true, false, true, false]);
        let p = platt_fit(&d).unwrap();
        assert!((p.apply_logit(1.3) - 0.5).abs() < 1e-6, "{p:?}");
    }

    #[test]
    fn single_class_is_a_fit_error() {
        let d = from_logits(&[0.1, 0.2], &[true, true]);
        assert!(matches!(platt_fit(&d), Err(Error::Fit(_))));
    }

    #[test]
    fn recovers_identity_on_calibrated_logits() {
        let mut rng = SplitMix64::new(11);
        let n = 50_000;
        let z: Vec<f64> = (0..n).map(|_| 2.0 * rng.normal()).collect();
        let y: Vec<bool> = z.iter().map(|&z| rng.bernoulli(sigmoid(z))).collect();
        let p = platt_fit(&from_logits(&z, &y)).unwrap();
        assert!((0.9..=1.1).contains(&p.a), "{p:?}");
        assert!((-0.05..=0.05).contains(&p.b), "{p:?}");
    }

    #[test]
    fn recovers_scaled_miscalibration() {
        let mut rng = SplitMix64::new(5);
        let z: Vec<f64> = (0..20_000).map(|_| rng.normal()).collect();
        let y: Vec<bool> = z.iter().map(|&z| rng.bernoulli(sigmoid(0.5 * z - 0.3))).collect();
        let p = platt_fit(&from_logits(&z, &y)).unwrap();
        assert!((p.a - 0.5).abs() < 0.1 && (p.b + 0.3).abs() < 0.1, "{p:?}");
    }

    #[test]
    fn never_worse_than_identity() {
        for seed in 0..50 {
            let mut rng = SplitMix64::new(seed);
            let n = 5 + rng.below(60) as usize;
            let z: Vec<f64> = (0..n).map(|_| 3.0 * rng.normal()).collect();
            let mut y: Vec<bool> = (0..n).map(|_| rng.bernoulli(0.4)).collect();
            y[0] = true;
            y[1] = false;
            let d = from_logits(&z, &y);
            let p = platt_fit(&d).unwrap();
            let fitted: Vec<f64> = z.iter().map(|&z| p.apply_logit(z)).collect();
            let base = cross_entropy(&d.scores(), &y).unwrap();
            let after = cross_entropy(&fitted, &y).unwrap();
            assert!(after <= base + 1e-12, "seed {seed}: {after} > {base}");
        }
    }
}
