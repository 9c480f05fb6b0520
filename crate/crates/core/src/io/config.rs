use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::DEFAULT_MIN_FRACTION;
use crate::error::{Error, Result};
use crate::harness::{GroupSpec, Method, SplitSpec, SweepGrid, SweepSettings, TABULAR_CF};
use crate::hjz;
use crate::hkrr::ALPHA_GRID;
use crate::metrics::SmEceConfig;

fn default_gamma() -> f64 {
    DEFAULT_MIN_FRACTION
}

fn default_n_splits() -> usize {
    5
}

fn default_ratios() -> [f64; 3] {
    [0.6, 0.2, 0.2]
}

fn default_cf() -> Vec<f64> {
    TABULAR_CF.to_vec()
}

fn default_alphas() -> Vec<f64> {
    ALPHA_GRID.to_vec()
}

fn default_rounds() -> usize {
    hjz::DEFAULT_ROUNDS
}

fn default_families() -> Vec<MethodFamily> {
    vec![
        MethodFamily::Base,
        MethodFamily::Platt,
        MethodFamily::Isotonic,
        MethodFamily::Temperature,
        MethodFamily::Hkrr,
        MethodFamily::Hjz,
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodFamily {
    Base,
    Platt,
    Isotonic,
    Temperature,
    Hkrr,
    Hjz,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    pub seed: u64,
    #[serde(default = "default_n_splits")]
    pub n_splits: usize,
    #[serde(default = "default_cf")]
    pub calibration_fractions: Vec<f64>,
    #[serde(default)]
    pub reuse_training_data: bool,
    #[serde(default = "default_ratios")]
    pub ratios: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodsConfig {
    #[serde(default = "default_families")]
    pub include: Vec<MethodFamily>,
    #[serde(default = "default_alphas")]
    pub hkrr_alphas: Vec<f64>,
    #[serde(default = "default_rounds")]
    pub hjz_rounds: usize,
}

impl Default for MethodsConfig {
    fn default() -> Self {
        Self { include: default_families(), hkrr_alphas: default_alphas(), hjz_rounds: default_rounds() }
    }
}

/// A full sweep description, read from TOML.
///
/// Relative `dataset` and `output_dir` paths are resolved against the
/// directory holding the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: PathBuf,
    pub output_dir: PathBuf,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    pub split: SplitConfig,
    #[serde(default)]
    pub methods: MethodsConfig,
    pub groups: Vec<GroupSpec>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::from_toml(&fs::read_to_string(path)?)?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.dataset = base.join(&cfg.dataset);
        cfg.output_dir = base.join(&cfg.output_dir);
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.groups.is_empty() {
            return Err(Error::Config("at least one group is required".into()));
        }
        for g in &self.groups {
            g.predicate.validate()?;
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::Config(format!("gamma {} outside [0, 1)", self.gamma)));
        }
        if self.split.calibration_fractions.is_empty() {
            return Err(Error::Config("calibration_fractions is empty".into()));
        }
        for &cf in &self.split.calibration_fractions {
            SplitSpec { calibration_fraction: cf, ..self.split_spec() }.validate()?;
        }
        if self.methods.include.is_empty() {
            return Err(Error::Config("methods.include is empty".into()));
        }
        if let Some(a) = self.methods.hkrr_alphas.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
            return Err(Error::Config(format!("alpha {a} must lie in (0, 1)")));
        }
        if self.methods.include.contains(&MethodFamily::Hkrr) && self.methods.hkrr_alphas.is_empty() {
            return Err(Error::Config("hkrr is included but hkrr_alphas is empty".into()));
        }
        if self.methods.hjz_rounds == 0 {
            return Err(Error::Config("hjz_rounds must be positive".into()));
        }
        Ok(())
    }

    fn split_spec(&self) -> SplitSpec {
        let [a, b, c] = self.split.ratios;
        SplitSpec {
            ratios: (a, b, c),
            calibration_fraction: 0.0,
            seed: self.split.seed,
            n_splits: self.split.n_splits,
            reuse_training_data: self.split.reuse_training_data,
        }
    }

    pub fn settings(&self) -> SweepSettings {
        SweepSettings { split: self.split_spec(), smece: SmEceConfig::default() }
    }

    pub fn grid(&self) -> SweepGrid {
        let mut methods = Vec::new();
        for family in &self.methods.include {
            match family {
                MethodFamily::Base => methods.push(Method::Base),
                MethodFamily::Platt => methods.push(Method::Platt),
                MethodFamily::Isotonic => methods.push(Method::Isotonic),
                MethodFamily::Temperature => methods.push(Method::Temperature),
                MethodFamily::Hkrr => methods.extend(self.methods.hkrr_alphas.iter().map(|&alpha| Method::Hkrr { alpha })),
                MethodFamily::Hjz => methods.extend(hjz::sweep_grid().into_iter().map(|mut c| {
                    c.rounds = self.methods.hjz_rounds;
                    Method::Hjz(c)
                })),
            }
        }
        SweepGrid { methods, cf_values: self.split.calibration_fractions.clone() }
    }
}

/// Group definitions on their own, for the single-shot subcommands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupsFile {
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    pub groups: Vec<GroupSpec>,
}

impl GroupsFile {
    pub fn load(path: &Path) -> Result<Self> {
        let file: Self = toml::from_str(&fs::read_to_string(path)?)?;
        for g in &file.groups {
            g.predicate.validate()?;
        }
        Ok(file)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, toml::to_string(self)?)?;
        Ok(())
    }
}
