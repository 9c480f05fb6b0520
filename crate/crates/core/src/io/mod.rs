//! File formats: CSV prediction files, TOML experiment and group configs,
//! JSON model files, and sweep reports.

pub mod config;
pub mod predictions;
pub mod report;

pub use config::{ExperimentConfig, GroupsFile, MethodFamily, MethodsConfig, SplitConfig};
pub use predictions::{load_dataset, load_predictions, read_predictions, save_predictions, write_predictions, PredictionFile};
pub use report::{emit_report, fmt3, mean_std_cell, ModelFile, ReportFiles, REPORT_COLUMNS};

use crate::error::Result;
use crate::harness::{run_sweep, SweepOutcome};

/// Loads the dataset named by `cfg`, runs the sweep and writes the report files.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<(SweepOutcome, ReportFiles)> {
    cfg.validate()?;
    let (dataset, built) = load_dataset(&cfg.dataset, &cfg.groups, cfg.gamma)?;
    let outcome = run_sweep(&dataset, &built.collection, &cfg.grid(), &cfg.settings())?;
    let files = emit_report(&outcome, &cfg.output_dir)?;
    Ok((outcome, files))
}
