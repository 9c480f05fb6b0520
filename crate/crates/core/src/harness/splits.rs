use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

/// Calibration fractions for tabular-scale sweeps.
pub const TABULAR_CF: [f64; 9] = [0.0, 0.01, 0.05, 0.1, 0.2, 0.4, 0.6, 0.8, 1.0];
/// Calibration fractions for large-scale sweeps.
pub const LARGE_SCALE_CF: [f64; 3] = [0.0, 0.2, 0.4];

/// Seed of the test-set permutation. Not configurable: the test set depends on `n` only.
pub const TEST_SET_SEED: u64 = 0x7E57_5E7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    /// Train, validation and test shares.
    pub ratios: (f64, f64, f64),
    pub calibration_fraction: f64,
    pub seed: u64,
    pub n_splits: usize,
    pub reuse_training_data: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self { ratios: (0.6, 0.2, 0.2), calibration_fraction: 0.0, seed: 0, n_splits: 5, reuse_training_data: false }
    }
}

impl SplitSpec {
    pub fn with_cf(cf: f64, seed: u64) -> Self {
        Self { calibration_fraction: cf, seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let (a, b, c) = self.ratios;
        if [a, b, c].iter().any(|r| !(0.0..=1.0).contains(r)) || (a + b + c - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("split ratios ({a}, {b}, {c}) must be in [0, 1] and sum to 1")));
        }
        if !(0.0..=1.0).contains(&self.calibration_fraction) {
            return Err(Error::Config(format!(
                "calibration fraction {} outside [0, 1]",
                self.calibration_fraction
            )));
        }
        if self.n_splits == 0 {
            return Err(Error::Config("n_splits must be positive".into()));
        }
        Ok(())
    }
}

/// Index sets of one split, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<usize>,
    pub calib: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
    /// The base predictor is replaced by the constant 1/2 (no training data left).
    pub constant_half: bool,
}

impl Splits {
    pub fn sizes(&self) -> (usize, usize, usize, usize) {
        (self.train.len(), self.calib.len(), self.val.len(), self.test.len())
    }
}

fn share(ratio: f64, n: usize) -> usize {
    (ratio * n as f64 + 1e-9).floor() as usize
}

pub fn make_splits(n: usize, spec: &SplitSpec) -> Result<Splits> {
    spec.validate()?;
    if n < 10 {
        return Err(Error::Argument(format!("{n} samples are too few to split (need at least 10)")));
    }
    let (_, val_ratio, test_ratio) = spec.ratios;
    let n_test = share(test_ratio, n);
    let n_val = share(val_ratio, n);
    if n_test == 0 || n_val == 0 || n_test + n_val >= n {
        return Err(Error::Argument(format!(
            "ratios {:?} leave an empty split at n = {n}",
            spec.ratios
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    SplitMix64::new(TEST_SET_SEED).shuffle(&mut order);
    let mut test = order[..n_test].to_vec();
    let mut rest = order[n_test..].to_vec();
    rest.sort_unstable();
    SplitMix64::new(spec.seed).shuffle(&mut rest);
    let mut val = rest[..n_val].to_vec();
    let mut train = rest[n_val..].to_vec();

    let cf = spec.calibration_fraction;
    let mut calib = if spec.reuse_training_data {
        train.clone()
    } else {
        let k = ((cf * train.len() as f64) - 1e-9).ceil().max(0.0) as usize;
        train.drain(..k.min(train.len())).collect()
    };
    for set in [&mut train, &mut calib, &mut val, &mut test] {
        set.sort_unstable();
    }
    Ok(Splits { train, calib, val, test, constant_half: cf >= 1.0 })
}
