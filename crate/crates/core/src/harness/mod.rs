//! The benchmark protocol: seeded splits with a calibration carve-out,
//! predicate-defined groups, synthetic data with known truth, and sweeps
//! that select by validation worst-group smECE.

pub mod groups;
pub mod splits;
pub mod sweep;
pub mod synthetic;

pub use groups::{build_groups, AttributeTable, BuiltGroups, GroupPredicate, GroupSpec};
pub use splits::{make_splits, SplitSpec, Splits, LARGE_SCALE_CF, TABULAR_CF};
pub use sweep::{aggregate, run_sweep, MeanStd, Method, RunResult, SweepGrid, SweepOutcome, SweepSettings};
pub use synthetic::{gen_synthetic, SyntheticData, SyntheticGroup, SyntheticSpec};

use serde::{Deserialize, Serialize};

use crate::data::GroupCollection;
use crate::error::{Error, Result};
use crate::metrics::{accuracy, binned_ece, brier, smece, SmEceConfig};
use crate::patch::DEFAULT_LAMBDA;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMetrics {
    pub name: String,
    pub count: usize,
    pub ece: f64,
    pub smece: f64,
}

/// Population and worst-group metrics of one score vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n: usize,
    pub ece: f64,
    pub max_ece: f64,
    pub smece: f64,
    pub max_smece: f64,
    pub accuracy: f64,
    pub brier: f64,
    pub per_group: Vec<GroupMetrics>,
}

/// Computes a [`MetricsReport`]. Groups with no members among these samples
/// are left out; at least one group must remain.
pub fn evaluate(scores: &[f64], labels: &[bool], groups: &GroupCollection, cfg: &SmEceConfig) -> Result<MetricsReport> {
    groups.check_matches(scores.len())?;
    let ece = binned_ece(scores, labels, DEFAULT_LAMBDA)?;
    let sm = smece(scores, labels, cfg)?.value;
    let mut per_group = Vec::with_capacity(groups.len());
    for g in groups.groups() {
        let idx = g.member_indices();
        if idx.is_empty() {
            continue;
        }
        let s: Vec<f64> = idx.iter().map(|&i| scores[i]).collect();
        let l: Vec<bool> = idx.iter().map(|&i| labels[i]).collect();
        per_group.push(GroupMetrics {
            name: g.name.clone(),
            count: idx.len(),
            ece: binned_ece(&s, &l, DEFAULT_LAMBDA)?,
            smece: smece(&s, &l, cfg)?.value,
        });
    }
    if per_group.is_empty() {
        return Err(Error::Argument("no group has members among the evaluated samples".into()));
    }
    Ok(MetricsReport {
        n: scores.len(),
        ece,
        max_ece: per_group.iter().map(|g| g.ece).fold(f64::NEG_INFINITY, f64::max),
        smece: sm,
        max_smece: per_group.iter().map(|g| g.smece).fold(f64::NEG_INFINITY, f64::max),
        accuracy: accuracy(scores, labels)?,
        brier: brier(scores, labels)?,
        per_group,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Group;

    #[test]
    fn population_is_excluded_from_the_maximum() {
        let scores = [0.1, 0.9, 0.5, 0.5];
        let labels = [false, true, false, true];
        let groups = GroupCollection::new(
            vec![
                Group { name: "a".into(), predicate: String::new(), members: vec![true, true, false, false] },
                Group { name: "b".into(), predicate: String::new(), members: vec![false, false, true, true] },
            ],
            0.0,
        )
        .unwrap();
        let r = evaluate(&scores, &labels, &groups, &SmEceConfig::default()).unwrap();
        assert_eq!(r.per_group.len(), 2);
        // group a: residuals -0.1 and +0.1 in different bins
        assert!((r.per_group[0].ece - 0.1).abs() < 1e-12);
        assert!((r.per_group[1].ece - 0.0).abs() < 1e-12);
        assert_eq!(r.max_ece, r.per_group[0].ece);
        assert_eq!(r.accuracy, 0.75);
    }
}
