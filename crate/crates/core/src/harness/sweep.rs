use std::cmp::Ordering;
use std::fmt;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::splits::{make_splits, SplitSpec, Splits};
use super::{evaluate, MetricsReport};
use crate::calibrators::{isotonic_fit, platt_fit, temperature_fit};
use crate::data::GroupCollection;
use crate::error::{Error, Result};
use crate::hjz::{self, hjz_fit, HjzConfig};
use crate::hkrr::{hkrr_fit, HkrrConfig, ALPHA_GRID};
use crate::metrics::SmEceConfig;
use crate::{Dataset, Fitted};

/// A post-processing method with its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Method {
    /// The base predictor, unchanged.
    Base,
    Platt,
    Isotonic,
    Temperature,
    Hkrr { alpha: f64 },
    Hjz(HjzConfig),
}

impl Method {
    pub fn family(&self) -> &'static str {
        match self {
            Method::Base => "Base",
            Method::Platt => "Platt",
            Method::Isotonic => "Isotonic",
            Method::Temperature => "Temperature",
            Method::Hkrr { .. } => "HKRR",
            Method::Hjz(_) => "HJZ",
        }
    }

    /// Fits on `calib`, whose masks define the groups.
    ///
    /// Platt and temperature scaling fall back to the identity when `calib`
    /// holds a single label class.
    pub fn fit(&self, calib: &Dataset) -> Result<Fitted> {
        let fallback = |r: Result<Fitted>| match r {
            Err(Error::Fit(_)) => Ok(Fitted::Identity),
            other => other,
        };
        match self {
            Method::Base => Ok(Fitted::Identity),
            Method::Platt => fallback(platt_fit(calib).map(Fitted::Platt)),
            Method::Isotonic => Ok(Fitted::Isotonic(isotonic_fit(calib))),
            Method::Temperature => fallback(temperature_fit(calib).map(Fitted::Temperature)),
            Method::Hkrr { alpha } => {
                hkrr_fit(calib, &GroupCollection::from_dataset(calib), &HkrrConfig::with_alpha(*alpha)).map(Fitted::Patched)
            }
            Method::Hjz(cfg) => hjz_fit(calib, &GroupCollection::from_dataset(calib), cfg).map(Fitted::Patched),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Base => write!(f, "base"),
            Method::Platt => write!(f, "platt"),
            Method::Isotonic => write!(f, "isotonic"),
            Method::Temperature => write!(f, "temperature"),
            Method::Hkrr { alpha } => write!(f, "hkrr(alpha={alpha})"),
            Method::Hjz(cfg) => write!(f, "{cfg}"),
        }
    }
}

/// Methods crossed with calibration fractions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub methods: Vec<Method>,
    pub cf_values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub method: Method,
    pub cf: f64,
}

impl GridPoint {
    pub fn id(&self) -> String {
        format!("{} cf={}", self.method, self.cf)
    }
}

impl SweepGrid {
    pub fn hkrr_methods() -> Vec<Method> {
        ALPHA_GRID.iter().map(|&alpha| Method::Hkrr { alpha }).collect()
    }

    pub fn hjz_methods() -> Vec<Method> {
        hjz::sweep_grid().into_iter().map(Method::Hjz).collect()
    }

    /// Base, the three classic calibrators, the HKRR α grid and the HJZ decay grid.
    pub fn full(cf_values: &[f64]) -> Self {
        let mut methods = vec![Method::Base, Method::Platt, Method::Isotonic, Method::Temperature];
        methods.extend(Self::hkrr_methods());
        methods.extend(Self::hjz_methods());
        Self { methods, cf_values: cf_values.to_vec() }
    }

    /// Points in grid order. Without data reuse a zero fraction leaves no
    /// calibration data, so only the base predictor is run there.
    pub fn points(&self, reuse_training_data: bool) -> Vec<GridPoint> {
        let mut out = Vec::new();
        for &cf in &self.cf_values {
            for m in &self.methods {
                if cf == 0.0 && *m != Method::Base && !reuse_training_data {
                    continue;
                }
                out.push(GridPoint { method: m.clone(), cf });
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSettings {
    /// Ratios, seed, split count and reuse flag. The calibration fraction
    /// is taken from each grid point.
    pub split: SplitSpec,
    pub smece: SmEceConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub point: String,
    pub method: Method,
    pub cf: f64,
    pub split: usize,
    pub seed: u64,
    pub patches: usize,
    pub validation: Option<MetricsReport>,
    pub test: Option<MetricsReport>,
    /// Set when the run failed; such runs are excluded from selection.
    pub error: Option<String>,
    /// Not serialized so that emitted files stay byte-identical across runs.
    #[serde(skip)]
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

/// Mean and sample (n − 1) standard deviation; a single value has std 0.
pub fn aggregate(values: &[f64]) -> Option<MeanStd> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = if n == 1 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    };
    Some(MeanStd { mean, std })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub ece: MeanStd,
    pub max_ece: MeanStd,
    pub smece: MeanStd,
    pub max_smece: MeanStd,
    pub accuracy: MeanStd,
    pub brier: MeanStd,
}

impl AggregateReport {
    pub fn from_reports(reports: &[&MetricsReport]) -> Option<Self> {
        let agg = |f: fn(&MetricsReport) -> f64| aggregate(&reports.iter().map(|r| f(r)).collect::<Vec<_>>());
        Some(Self {
            ece: agg(|r| r.ece)?,
            max_ece: agg(|r| r.max_ece)?,
            smece: agg(|r| r.smece)?,
            max_smece: agg(|r| r.max_smece)?,
            accuracy: agg(|r| r.accuracy)?,
            brier: agg(|r| r.brier)?,
        })
    }
}

/// All runs of one grid point, aggregated over splits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSummary {
    pub id: String,
    pub method: Method,
    pub family: String,
    pub cf: f64,
    pub completed: usize,
    pub failed: usize,
    pub mean_patches: f64,
    pub validation: Option<AggregateReport>,
    pub test: Option<AggregateReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyChoice {
    pub family: String,
    pub point: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub runs: Vec<RunResult>,
    pub points: Vec<PointSummary>,
    /// Overall selected point id.
    pub best: Option<String>,
    /// Selected point per method family, in first-appearance order.
    pub best_by_family: Vec<FamilyChoice>,
}

impl SweepOutcome {
    pub fn point(&self, id: &str) -> Option<&PointSummary> {
        self.points.iter().find(|p| p.id == id)
    }
}

fn selection_order(a: &PointSummary, b: &PointSummary) -> Ordering {
    let key = |p: &PointSummary| p.validation.as_ref().map_or(f64::INFINITY, |v| v.max_smece.mean);
    key(a)
        .total_cmp(&key(b))
        .then(a.mean_patches.total_cmp(&b.mean_patches))
        .then_with(|| a.id.cmp(&b.id))
}

/// The point with the least mean validation max-smECE; ties go to fewer
/// patches and then to the smaller id. Points without a completed run are skipped.
pub fn select_best<'a>(points: impl IntoIterator<Item = &'a PointSummary>) -> Option<&'a PointSummary> {
    points.into_iter().filter(|p| p.validation.is_some()).min_by(|a, b| selection_order(a, b))
}

struct SplitData {
    calib: Option<Dataset>,
    val: Dataset,
    test: Dataset,
}

fn materialize(dataset: &Dataset, splits: &Splits) -> Result<SplitData> {
    let base = if splits.constant_half { dataset.with_scores(&vec![0.5; dataset.len()])? } else { dataset.clone() };
    let calib = if splits.calib.is_empty() { None } else { Some(base.subset(&splits.calib)?) };
    Ok(SplitData { calib, val: base.subset(&splits.val)?, test: base.subset(&splits.test)? })
}

fn run_one(point: &GridPoint, data: &SplitData, split: usize, seed: u64, cfg: &SmEceConfig) -> RunResult {
    let start = Instant::now();
    let outcome = (|| -> Result<(usize, MetricsReport, MetricsReport)> {
        let fitted = match (&point.method, &data.calib) {
            (Method::Base, _) => Fitted::Identity,
            (m, Some(calib)) => m.fit(calib)?,
            (m, None) => return Err(Error::Argument(format!("{m} needs calibration data"))),
        };
        let report = |d: &Dataset| -> Result<MetricsReport> {
            let scores = fitted.apply(d)?;
            evaluate(&scores, &d.labels(), &GroupCollection::from_dataset(d), cfg)
        };
        Ok((fitted.patch_count(), report(&data.val)?, report(&data.test)?))
    })();
    let (patches, validation, test, error) = match outcome {
        Ok((p, v, t)) => (p, Some(v), Some(t), None),
        Err(e) => (0, None, None, Some(e.to_string())),
    };
    RunResult {
        point: point.id(),
        method: point.method.clone(),
        cf: point.cf,
        split,
        seed,
        patches,
        validation,
        test,
        error,
        wall_time_s: start.elapsed().as_secs_f64(),
    }
}

/// Runs every grid point on every split.
///
/// Split `s` uses seed `settings.split.seed + s`. A failing run is recorded
/// with its error and never stops the sweep.
pub fn run_sweep(
    dataset: &Dataset,
    groups: &GroupCollection,
    grid: &SweepGrid,
    settings: &SweepSettings,
) -> Result<SweepOutcome> {
    settings.split.validate()?;
    settings.smece.validate()?;
    groups.check_matches(dataset.len())?;
    if groups.is_empty() {
        return Err(Error::Argument("sweep needs at least one group".into()));
    }
    let points = grid.points(settings.split.reuse_training_data);
    if points.is_empty() {
        return Err(Error::Argument("sweep grid is empty".into()));
    }
    let data = dataset.with_groups(groups.names(), &groups.masks())?;

    let mut cfs: Vec<f64> = points.iter().map(|p| p.cf).collect();
    cfs.sort_by(f64::total_cmp);
    cfs.dedup();
    let n_splits = settings.split.n_splits;
    let seed_of = |s: usize| settings.split.seed.wrapping_add(s as u64);
    let prepared: Vec<(f64, Vec<SplitData>)> = cfs
        .iter()
        .map(|&cf| {
            let per_split = (0..n_splits)
                .map(|s| {
                    let spec = SplitSpec { calibration_fraction: cf, seed: seed_of(s), ..settings.split.clone() };
                    materialize(&data, &make_splits(data.len(), &spec)?)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((cf, per_split))
        })
        .collect::<Result<_>>()?;
    let splits_for = |cf: f64| &prepared.iter().find(|(c, _)| *c == cf).expect("prepared for every cf").1;

    let tasks: Vec<(usize, usize)> = (0..points.len()).flat_map(|p| (0..n_splits).map(move |s| (p, s))).collect();
    let runs: Vec<RunResult> = tasks
        .par_iter()
        .map(|&(p, s)| run_one(&points[p], &splits_for(points[p].cf)[s], s, seed_of(s), &settings.smece))
        .collect();

    let summaries: Vec<PointSummary> = points
        .iter()
        .enumerate()
        .map(|(p, point)| {
            let mine: Vec<&RunResult> = runs[p * n_splits..(p + 1) * n_splits].iter().filter(|r| r.error.is_none()).collect();
            let val: Vec<&MetricsReport> = mine.iter().filter_map(|r| r.validation.as_ref()).collect();
            let test: Vec<&MetricsReport> = mine.iter().filter_map(|r| r.test.as_ref()).collect();
            PointSummary {
                id: point.id(),
                method: point.method.clone(),
                family: point.method.family().to_string(),
                cf: point.cf,
                completed: mine.len(),
                failed: n_splits - mine.len(),
                mean_patches: aggregate(&mine.iter().map(|r| r.patches as f64).collect::<Vec<_>>())
                    .map_or(0.0, |m| m.mean),
                validation: AggregateReport::from_reports(&val),
                test: AggregateReport::from_reports(&test),
            }
        })
        .collect();

    let mut families: Vec<&str> = Vec::new();
    for p in &summaries {
        if !families.contains(&p.family.as_str()) {
            families.push(&p.family);
        }
    }
    let best_by_family = families
        .iter()
        .filter_map(|f| {
            select_best(summaries.iter().filter(|p| p.family == *f))
                .map(|p| FamilyChoice { family: f.to_string(), point: p.id.clone() })
        })
        .collect();
    let best = select_best(&summaries).map(|p| p.id.clone());
    Ok(SweepOutcome { runs, points: summaries, best, best_by_family })
}
