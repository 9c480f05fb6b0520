//! Scored samples, datasets and group collections.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{logit, sigmoid, Scalar};

/// Maximum number of groups a [`GroupMask`] can address.
pub const MAX_GROUPS: usize = 128;

/// Bitset over group indices.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GroupMask(u128);

impl GroupMask {
    pub const EMPTY: GroupMask = GroupMask(0);

    pub fn from_indices<I: IntoIterator<Item = usize>>(indices: I) -> Self {
        let mut m = Self::EMPTY;
        for i in indices {
            m.insert(i);
        }
        m
    }

    #[inline]
    pub fn contains(self, group: usize) -> bool {
        group < MAX_GROUPS && (self.0 >> group) & 1 == 1
    }

    #[inline]
    pub fn insert(&mut self, group: usize) {
        assert!(group < MAX_GROUPS, "group index {group} exceeds mask capacity");
        self.0 |= 1u128 << group;
    }

    /// One past the highest set bit (0 for an empty mask).
    pub fn span(self) -> usize {
        (128 - self.0.leading_zeros()) as usize
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        (0..self.span()).filter(move |&g| self.contains(g))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredSample<T> {
    pub score: T,
    pub logit: Option<T>,
    pub label: bool,
    pub groups: GroupMask,
}

impl<T: Scalar> ScoredSample<T> {
    pub fn new(score: T, label: bool) -> Self {
        Self { score, logit: None, label, groups: GroupMask::EMPTY }
    }

    pub fn with_groups(mut self, groups: GroupMask) -> Self {
        self.groups = groups;
        self
    }

    pub fn with_logit(mut self, logit: T) -> Self {
        self.logit = Some(logit);
        self
    }

    #[inline]
    pub fn label_value(&self) -> T {
        if self.label {
            T::one()
        } else {
            T::zero()
        }
    }

    /// Stored logit, or `ln(p/(1-p))` of the clamped score.
    #[inline]
    pub fn logit_or_derived(&self) -> T {
        self.logit.unwrap_or_else(|| logit(self.score))
    }
}

/// Ordered samples plus the names of the groups their masks refer to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredDataset<T> {
    samples: Vec<ScoredSample<T>>,
    group_names: Vec<String>,
}

impl<T: Scalar> ScoredDataset<T> {
    pub fn new(samples: Vec<ScoredSample<T>>, group_names: Vec<String>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Argument("dataset must contain at least one sample".into()));
        }
        if group_names.len() > MAX_GROUPS {
            return Err(Error::Argument(format!(
                "{} groups exceed the supported maximum of {MAX_GROUPS}",
                group_names.len()
            )));
        }
        let tol = T::of(1e-6);
        for (i, s) in samples.iter().enumerate() {
            if !(s.score >= T::zero() && s.score <= T::one()) {
                return Err(Error::Argument(format!("sample {i}: score {} outside [0, 1]", s.score)));
            }
            if s.groups.span() > group_names.len() {
                return Err(Error::Argument(format!(
                    "sample {i}: group mask references index {} but only {} groups are named",
                    s.groups.span() - 1,
                    group_names.len()
                )));
            }
            if let Some(z) = s.logit {
                if !z.is_finite() || (sigmoid(z) - s.score).abs() > tol {
                    return Err(Error::Argument(format!(
                        "sample {i}: logit {z} inconsistent with score {}",
                        s.score
                    )));
                }
            }
        }
        Ok(Self { samples, group_names })
    }

    pub fn from_scores(scores: &[T], labels: &[bool]) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(Error::Argument(format!(
                "{} scores but {} labels",
                scores.len(),
                labels.len()
            )));
        }
        let samples = scores.iter().zip(labels).map(|(&s, &y)| ScoredSample::new(s, y)).collect();
        Self::new(samples, Vec::new())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[ScoredSample<T>] {
        &self.samples
    }

    pub fn group_names(&self) -> &[String] {
        &self.group_names
    }

    pub fn scores(&self) -> Vec<T> {
        self.samples.iter().map(|s| s.score).collect()
    }

    pub fn labels(&self) -> Vec<bool> {
        self.samples.iter().map(|s| s.label).collect()
    }

    pub fn label_values(&self) -> Vec<T> {
        self.samples.iter().map(|s| s.label_value()).collect()
    }

    pub fn logits(&self) -> Vec<T> {
        self.samples.iter().map(|s| s.logit_or_derived()).collect()
    }

    pub fn has_both_classes(&self) -> bool {
        let pos = self.samples.iter().filter(|s| s.label).count();
        pos > 0 && pos < self.samples.len()
    }

    /// Samples at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let samples = indices
            .iter()
            .map(|&i| {
                self.samples.get(i).cloned().ok_or_else(|| {
                    Error::Argument(format!("index {i} out of bounds for {} samples", self.len()))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(samples, self.group_names.clone())
    }

    /// Same samples with new scores. Logits are dropped since they no longer match.
    pub fn with_scores(&self, scores: &[T]) -> Result<Self> {
        if scores.len() != self.len() {
            return Err(Error::Argument(format!(
                "{} replacement scores for {} samples",
                scores.len(),
                self.len()
            )));
        }
        let samples = self
            .samples
            .iter()
            .zip(scores)
            .map(|(s, &v)| ScoredSample { score: v, logit: None, label: s.label, groups: s.groups })
            .collect();
        Self::new(samples, self.group_names.clone())
    }

    /// Replaces every group mask; `names` become the new group list.
    pub fn with_groups(&self, names: Vec<String>, masks: &[GroupMask]) -> Result<Self> {
        if masks.len() != self.len() {
            return Err(Error::Argument(format!("{} masks for {} samples", masks.len(), self.len())));
        }
        let samples = self
            .samples
            .iter()
            .zip(masks)
            .map(|(s, &m)| ScoredSample { groups: m, ..s.clone() })
            .collect();
        Self::new(samples, names)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Group {
    pub name: String,
    /// Human-readable predicate that produced the membership.
    pub predicate: String,
    pub members: Vec<bool>,
}

impl Group {
    pub fn size(&self) -> usize {
        self.members.iter().filter(|&&m| m).count()
    }

    pub fn member_indices(&self) -> Vec<usize> {
        self.members.iter().enumerate().filter_map(|(i, &m)| m.then_some(i)).collect()
    }
}

/// Possibly overlapping subgroups of a dataset, each above a minimum mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupCollection {
    groups: Vec<Group>,
    min_fraction: f64,
}

/// Default minimum group mass: groups must exceed 0.5% of the data.
pub const DEFAULT_MIN_FRACTION: f64 = 0.005;

impl GroupCollection {
    /// Validates lengths and the strict `fraction > min_fraction` rule.
    pub fn new(groups: Vec<Group>, min_fraction: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&min_fraction) {
            return Err(Error::Config(format!("min_fraction {min_fraction} outside [0, 1]")));
        }
        if groups.len() > MAX_GROUPS {
            return Err(Error::Argument(format!("{} groups exceed {MAX_GROUPS}", groups.len())));
        }
        if let Some(first) = groups.first() {
            let n = first.members.len();
            for g in &groups {
                if g.members.len() != n {
                    return Err(Error::Argument(format!(
                        "group {} has {} members flags, expected {n}",
                        g.name,
                        g.members.len()
                    )));
                }
                if n > 0 && !(g.size() as f64 / n as f64 > min_fraction) {
                    return Err(Error::Argument(format!(
                        "group {} holds {} of {n} samples, not above the minimum fraction {min_fraction}",
                        g.name,
                        g.size()
                    )));
                }
            }
        }
        Ok(Self { groups, min_fraction })
    }

    /// Reads memberships straight from the dataset's masks (no mass filter).
    pub fn from_dataset<T: Scalar>(dataset: &ScoredDataset<T>) -> Self {
        let groups = dataset
            .group_names()
            .iter()
            .enumerate()
            .map(|(g, name)| Group {
                name: name.clone(),
                predicate: format!("mask bit {g}"),
                members: dataset.samples().iter().map(|s| s.groups.contains(g)).collect(),
            })
            .collect();
        Self { groups, min_fraction: 0.0 }
    }

    /// One group covering every sample.
    pub fn whole_population(n: usize) -> Self {
        Self {
            groups: vec![Group { name: "all".into(), predicate: "true".into(), members: vec![true; n] }],
            min_fraction: 0.0,
        }
    }

    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn min_fraction(&self) -> f64 {
        self.min_fraction
    }

    pub fn names(&self) -> Vec<String> {
        self.groups.iter().map(|g| g.name.clone()).collect()
    }

    /// Sample count the membership vectors were built for.
    pub fn sample_count(&self) -> Option<usize> {
        self.groups.first().map(|g| g.members.len())
    }

    /// Member index lists, one per group.
    pub fn member_lists(&self) -> Vec<Vec<usize>> {
        self.groups.iter().map(Group::member_indices).collect()
    }

    /// Per-sample masks, bit `g` set when the sample belongs to group `g`.
    pub fn masks(&self) -> Vec<GroupMask> {
        let n = self.sample_count().unwrap_or(0);
        let mut masks = vec![GroupMask::EMPTY; n];
        for (g, group) in self.groups.iter().enumerate() {
            for (mask, &m) in masks.iter_mut().zip(&group.members) {
                if m {
                    mask.insert(g);
                }
            }
        }
        masks
    }

    pub(crate) fn check_matches(&self, n: usize) -> Result<()> {
        match self.sample_count() {
            Some(m) if m != n => Err(Error::Argument(format!(
                "group memberships cover {m} samples but the dataset has {n}"
            ))),
            _ => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn group(name: &str, members: Vec<bool>) -> Group {
        Group { name: name.into(), predicate: String::new(), members }
    }

    #[test]
    fn mask_roundtrips_indices() {
        let m = GroupMask::from_indices([0, 3, 127]);
        assert_eq!(m.iter().collect::<Vec<_>>(), vec![0, 3, 127]);
        assert!(!m.contains(1));
        assert_eq!(m.span(), 128);
        assert_eq!(GroupMask::EMPTY.span(), 0);
    }

    #[test]
    fn dataset_rejects_out_of_range_scores_and_masks() {
        assert!(ScoredDataset::<f64>::from_scores(&[], &[]).is_err());
        assert!(ScoredDataset::from_scores(&[1.2f64], &[true]).is_err());
        let s = ScoredSample::new(0.3f64, true).with_groups(GroupMask::from_indices([1]));
        assert!(ScoredDataset::new(vec![s.clone()], vec!["a".into()]).is_err());
        assert!(ScoredDataset::new(vec![s], vec!["a".into(), "b".into()]).is_ok());
    }

    #[test]
    fn dataset_checks_logit_consistency() {
        let ok = ScoredSample::new(sigmoid(0.7f64), true).with_logit(0.7);
        assert!(ScoredDataset::new(vec![ok], vec![]).is_ok());
        let bad = ScoredSample::new(0.5f64, true).with_logit(0.7);
        assert!(ScoredDataset::new(vec![bad], vec![]).is_err());
    }

    #[test]
    fn collection_enforces_strict_min_fraction() {
        let n = 1000;
        let mut five = vec![false; n];
        five[..5].iter_mut().for_each(|m| *m = true);
        let mut six = vec![false; n];
        six[..6].iter_mut().for_each(|m| *m = true);
        assert!(GroupCollection::new(vec![group("five", five)], 0.005).is_err());
        assert!(GroupCollection::new(vec![group("six", six)], 0.005).is_ok());
    }

    #[test]
    fn masks_follow_membership() {
        let c = GroupCollection::new(
            vec![group("a", vec![true, false, true]), group("b", vec![true, true, false])],
            0.0,
        )
        .unwrap();
        let masks = c.masks();
        assert_eq!(masks[0], GroupMask::from_indices([0, 1]));
        assert_eq!(masks[1], GroupMask::from_indices([1]));
        assert_eq!(masks[2], GroupMask::from_indices([0]));
        assert_eq!(c.member_lists(), vec![vec![0, 2], vec![0, 1]]);
    }
}
