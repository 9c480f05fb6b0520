use serde::{Deserialize, Serialize};

use super::groups::{build_groups, AttributeTable, GroupPredicate, GroupSpec};
use crate::data::{GroupCollection, DEFAULT_MIN_FRACTION};
use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::scalar::{clip_unit, sigmoid};
use crate::{Dataset, Sample};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticGroup {
    pub name: String,
    pub predicate: GroupPredicate,
    /// Added to the score of every member.
    pub shift: f64,
}

/// Recipe for a dataset with known true probabilities.
///
/// Columns `x0..` are standard normal rounded to 4 decimals; columns `c0..`
/// take levels `l0..l{k-1}` uniformly. The true probability is
/// `sigmoid(bias + Σ weights[j] · x_j)` and the emitted score is that
/// probability plus the shifts of every group containing the row, clipped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n: usize,
    pub seed: u64,
    pub continuous: usize,
    #[serde(default)]
    pub categorical: Vec<usize>,
    pub weights: Vec<f64>,
    #[serde(default)]
    pub bias: f64,
    pub groups: Vec<SyntheticGroup>,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
}

fn default_gamma() -> f64 {
    DEFAULT_MIN_FRACTION
}

fn gt(field: &str, value: f64) -> GroupPredicate {
    GroupPredicate::ThresholdGt { field: field.into(), value }
}

fn lt(field: &str, value: f64) -> GroupPredicate {
    GroupPredicate::ThresholdLt { field: field.into(), value }
}

fn eq(field: &str, value: &str) -> GroupPredicate {
    GroupPredicate::Equals { field: field.into(), value: value.into() }
}

fn and(a: GroupPredicate, b: GroupPredicate) -> GroupPredicate {
    GroupPredicate::Conjunction { clauses: vec![a, b] }
}

impl SyntheticSpec {
    /// Eight overlapping groups with shifts of up to 0.2 in magnitude.
    pub fn benchmark(n: usize, seed: u64) -> Self {
        let groups = [
            ("x0_high", gt("x0", 0.5), 0.2),
            ("x1_low", lt("x1", -0.3), -0.15),
            ("c0_l1", eq("c0", "l1"), 0.1),
            ("c1_l2", eq("c1", "l2"), -0.2),
            ("x2_pos", gt("x2", 0.0), 0.08),
            ("x3_pos_c0_l0", and(gt("x3", 0.0), eq("c0", "l0")), -0.12),
            ("x0_neg", lt("x0", 0.0), -0.05),
            ("x1_pos_c1_l0", and(gt("x1", 0.0), eq("c1", "l0")), 0.15),
        ];
        Self {
            n,
            seed,
            continuous: 4,
            categorical: vec![3, 4],
            weights: vec![1.0, -0.8, 0.6, 0.3],
            bias: 0.0,
            groups: groups
                .into_iter()
                .map(|(name, predicate, shift)| SyntheticGroup { name: name.into(), predicate, shift })
                .collect(),
            gamma: DEFAULT_MIN_FRACTION,
        }
    }

    /// [`SyntheticSpec::benchmark`] with every shift set to zero.
    pub fn calibrated(n: usize, seed: u64) -> Self {
        let mut spec = Self::benchmark(n, seed);
        spec.groups.iter_mut().for_each(|g| g.shift = 0.0);
        spec
    }

    pub fn group_specs(&self) -> Vec<GroupSpec> {
        self.groups.iter().map(|g| GroupSpec::new(g.name.clone(), g.predicate.clone())).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("synthetic n must be positive".into()));
        }
        if self.weights.len() != self.continuous {
            return Err(Error::Config(format!(
                "{} weights for {} continuous features",
                self.weights.len(),
                self.continuous
            )));
        }
        if self.categorical.contains(&0) {
            return Err(Error::Config("categorical features need at least one level".into()));
        }
        if self.groups.iter().any(|g| !g.shift.is_finite()) || !self.bias.is_finite() {
            return Err(Error::Config("shifts and bias must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    /// Scores, labels and group masks for the declared groups.
    pub dataset: Dataset,
    pub attributes: AttributeTable,
    pub true_probs: Vec<f64>,
    pub groups: GroupCollection,
}

pub fn gen_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let n = spec.n;
    let mut features = SplitMix64::stream(spec.seed, 0);
    let mut outcomes = SplitMix64::stream(spec.seed, 1);

    let mut names: Vec<String> = (0..spec.continuous).map(|j| format!("x{j}")).collect();
    names.extend((0..spec.categorical.len()).map(|j| format!("c{j}")));
    let mut columns: Vec<Vec<String>> = vec![Vec::with_capacity(n); names.len()];
    let mut true_probs = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let mut z = spec.bias;
        for (j, w) in spec.weights.iter().enumerate() {
            let x = (features.normal() * 1e4).round() / 1e4;
            z += w * x;
            columns[j].push(x.to_string());
        }
        for (j, &levels) in spec.categorical.iter().enumerate() {
            columns[spec.continuous + j].push(format!("l{}", features.below(levels as u64)));
        }
        let p = sigmoid(z);
        labels.push(outcomes.bernoulli(p));
        true_probs.push(p);
    }
    let attributes = AttributeTable::new(names, columns)?;

    let built = build_groups(&spec.group_specs(), &attributes, spec.gamma)?;
    if let Some(name) = built.dropped.first() {
        return Err(Error::Generation(format!(
            "group {name} holds at most {} of the {n} rows",
            spec.gamma
        )));
    }
    let groups = built.collection;
    let masks = groups.masks();
    let samples = (0..n)
        .map(|i| {
            let shift: f64 = masks[i].iter().map(|g| spec.groups[g].shift).sum();
            Sample::new(clip_unit(true_probs[i] + shift), labels[i]).with_groups(masks[i])
        })
        .collect();
    let dataset = Dataset::new(samples, groups.names())?;
    Ok(SyntheticData { dataset, attributes, true_probs, groups })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{group_metric, smece, Metric, SmEceConfig};

    #[test]
    fn same_seed_same_data() {
        let a = gen_synthetic(&SyntheticSpec::benchmark(500, 9)).unwrap();
        let b = gen_synthetic(&SyntheticSpec::benchmark(500, 9)).unwrap();
        assert_eq!(a.dataset, b.dataset);
        assert_eq!(a.attributes, b.attributes);
        let c = gen_synthetic(&SyntheticSpec::benchmark(500, 10)).unwrap();
        assert_ne!(a.dataset, c.dataset);
    }

    #[test]
    fn benchmark_groups_overlap() {
        let d = gen_synthetic(&SyntheticSpec::benchmark(5_000, 1)).unwrap();
        assert_eq!(d.groups.len(), 8);
        let multi = d.dataset.samples().iter().filter(|s| s.groups.iter().count() >= 2).count();
        assert!(multi > 2_500);
    }

    #[test]
    fn unshifted_data_is_calibrated_on_every_group() {
        let d = gen_synthetic(&SyntheticSpec::calibrated(50_000, 2)).unwrap();
        let r = group_metric(Metric::Smece, &d.dataset, &d.groups, &SmEceConfig::default()).unwrap();
        assert!(r.max_value <= 0.02, "{}", r.max_value);
    }

    #[test]
    fn a_single_shift_shows_up_as_group_error() {
        let mut spec = SyntheticSpec::calibrated(50_000, 3);
        spec.groups[4].shift = 0.2;
        let d = gen_synthetic(&spec).unwrap();
        let idx = d.groups.groups()[4].member_indices();
        let s: Vec<f64> = idx.iter().map(|&i| d.dataset.samples()[i].score).collect();
        let l: Vec<bool> = idx.iter().map(|&i| d.dataset.samples()[i].label).collect();
        let e = smece(&s, &l, &SmEceConfig::default()).unwrap().value;
        assert!((0.17..=0.22).contains(&e), "{e}");
    }

    #[test]
    fn tiny_groups_fail_generation() {
        let mut spec = SyntheticSpec::benchmark(1_000, 4);
        spec.groups[0].predicate = gt("x0", 3.5);
        assert!(matches!(gen_synthetic(&spec), Err(Error::Generation(_))));
    }

    #[test]
    fn attributes_round_trip_through_text() {
        let d = gen_synthetic(&SyntheticSpec::benchmark(200, 5)).unwrap();
        for cell in d.attributes.column("x0").unwrap() {
            let x: f64 = cell.parse().unwrap();
            assert_eq!(x.to_string(), *cell);
        }
    }
}
