//! Calibration and accuracy metrics, overall and per group.

mod smece;

pub use smece::{smece, smece_at_bandwidth, SmEce, SmEceConfig};

use serde::{Deserialize, Serialize};

use crate::data::{GroupCollection, ScoredDataset};
use crate::error::{Error, Result};
use crate::patch::BinGrid;
use crate::scalar::{Scalar, PROB_CLAMP};

fn check_lengths<T>(scores: &[T], labels: &[bool]) -> Result<()> {
    if scores.is_empty() {
        return Err(Error::Argument("metric of an empty sample".into()));
    }
    if scores.len() != labels.len() {
        return Err(Error::Argument(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    Ok(())
}

#[inline]
fn y<T: Scalar>(label: bool) -> T {
    if label {
        T::one()
    } else {
        T::zero()
    }
}

/// Binned expected calibration error with bins of width `lambda`.
///
/// `Σ_b (n_b / n) · |mean(y | b) − mean(v | b)|`; empty bins add nothing.
pub fn binned_ece<T: Scalar>(scores: &[T], labels: &[bool], lambda: T) -> Result<T> {
    check_lengths(scores, labels)?;
    let grid = BinGrid::from_width(lambda)?;
    let mut gap = vec![T::zero(); grid.bins()];
    for (&v, &l) in scores.iter().zip(labels) {
        gap[grid.index(v)] = gap[grid.index(v)] + (y::<T>(l) - v);
    }
    // n_b/n · |Σ_b(y − v)/n_b| = |Σ_b(y − v)| / n
    let total: T = gap.iter().map(|g| g.abs()).sum();
    Ok(total / T::of_usize(scores.len()))
}

/// Mean log loss with probabilities clamped to `[1e-6, 1 − 1e-6]`.
pub fn cross_entropy<T: Scalar>(scores: &[T], labels: &[bool]) -> Result<T> {
    check_lengths(scores, labels)?;
    let lo = T::of(PROB_CLAMP);
    let total: T = scores
        .iter()
        .zip(labels)
        .map(|(&p, &l)| {
            let p = p.max(lo).min(T::one() - lo);
            if l {
                -p.ln()
            } else {
                -(T::one() - p).ln()
            }
        })
        .sum();
    Ok(total / T::of_usize(scores.len()))
}

/// Mean squared error between score and label.
pub fn brier<T: Scalar>(scores: &[T], labels: &[bool]) -> Result<T> {
    check_lengths(scores, labels)?;
    let total: T = scores.iter().zip(labels).map(|(&p, &l)| (p - y::<T>(l)).powi(2)).sum();
    Ok(total / T::of_usize(scores.len()))
}

/// Fraction of samples where `score >= 0.5` agrees with the label.
pub fn accuracy<T: Scalar>(scores: &[T], labels: &[bool]) -> Result<T> {
    check_lengths(scores, labels)?;
    let half = T::of(0.5);
    let hits = scores.iter().zip(labels).filter(|(&p, &l)| (p >= half) == l).count();
    Ok(T::of_usize(hits) / T::of_usize(scores.len()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Ece,
    Smece,
    Accuracy,
    Brier,
}

impl Metric {
    pub fn evaluate<T: Scalar>(self, scores: &[T], labels: &[bool], smece_cfg: &SmEceConfig) -> Result<T> {
        match self {
            Metric::Ece => binned_ece(scores, labels, T::of(crate::patch::DEFAULT_LAMBDA)),
            Metric::Smece => smece(scores, labels, smece_cfg).map(|r| r.value),
            Metric::Accuracy => accuracy(scores, labels),
            Metric::Brier => brier(scores, labels),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupValue<T> {
    pub name: String,
    pub value: T,
    pub count: usize,
}

/// A metric per group, overall, and its maximum over groups.
///
/// The overall value is reported alongside but never enters the maximum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMetricReport<T> {
    pub metric: Metric,
    pub per_group: Vec<GroupValue<T>>,
    pub overall: T,
    pub max_value: T,
    pub argmax_group: String,
}

pub fn group_metric<T: Scalar>(
    metric: Metric,
    dataset: &ScoredDataset<T>,
    groups: &GroupCollection,
    smece_cfg: &SmEceConfig,
) -> Result<GroupMetricReport<T>> {
    group_metric_for_scores(metric, &dataset.scores(), &dataset.labels(), groups, smece_cfg)
}

/// [`group_metric`] over explicit score and label vectors.
pub fn group_metric_for_scores<T: Scalar>(
    metric: Metric,
    scores: &[T],
    labels: &[bool],
    groups: &GroupCollection,
    smece_cfg: &SmEceConfig,
) -> Result<GroupMetricReport<T>> {
    check_lengths(scores, labels)?;
    if groups.is_empty() {
        return Err(Error::Argument("group metric needs at least one group".into()));
    }
    groups.check_matches(scores.len())?;
    let overall = metric.evaluate(scores, labels, smece_cfg)?;
    let mut per_group = Vec::with_capacity(groups.len());
    for g in groups.groups() {
        let idx = g.member_indices();
        if idx.is_empty() {
            return Err(Error::Argument(format!("group {} is empty on this dataset", g.name)));
        }
        let s: Vec<T> = idx.iter().map(|&i| scores[i]).collect();
        let l: Vec<bool> = idx.iter().map(|&i| labels[i]).collect();
        per_group.push(GroupValue { name: g.name.clone(), value: metric.evaluate(&s, &l, smece_cfg)?, count: idx.len() });
    }
    let (arg, max) = per_group
        .iter()
        .enumerate()
        .fold((0, per_group[0].value), |(ai, am), (i, gv)| if gv.value > am { (i, gv.value) } else { (ai, am) });
    Ok(GroupMetricReport {
        metric,
        argmax_group: per_group[arg].name.clone(),
        max_value: max,
        overall,
        per_group,
    })
}
