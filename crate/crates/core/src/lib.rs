//! Multicalibration measurement and post-processing.
//!
//! - [`metrics`]: binned ECE, smoothed ECE, losses, worst-group reports.
//! - [`calibrators`]: Platt scaling, isotonic regression, temperature scaling.
//! - [`hkrr`]: iterative category patching until every eligible category is
//!   calibrated to within `α`.
//! - [`hjz`]: multicalibration as a game between a no-regret learner and a
//!   violation-seeking adversary.
//! - [`harness`]: splits, group construction, synthetic data and sweeps.
//! - [`io`]: prediction files, experiment configs and report emission.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix it to `f64`, which the harness and file formats use.

pub mod calibrators;
pub mod data;
pub mod error;
pub mod harness;
pub mod hjz;
pub mod hkrr;
pub mod io;
pub mod metrics;
pub mod patch;
pub mod rng;
pub mod scalar;

pub use data::{Group, GroupCollection, GroupMask, ScoredSample, DEFAULT_MIN_FRACTION};
pub use error::{Error, Result};
pub use patch::{bin_index, BinGrid, Patch, Provenance, DEFAULT_LAMBDA};
pub use scalar::Scalar;

pub type Sample = data::ScoredSample<f64>;
pub type Dataset = data::ScoredDataset<f64>;
pub type Predictor = patch::PatchedPredictor<f64>;
pub type Fitted = calibrators::FittedCalibrator<f64>;
pub type GroupReport = metrics::GroupMetricReport<f64>;

pub use data::ScoredDataset;
pub use patch::PatchedPredictor;
