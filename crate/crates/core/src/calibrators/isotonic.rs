use serde::{Deserialize, Serialize};

use crate::data::ScoredDataset;
use crate::scalar::Scalar;

/// Non-decreasing step function from score to probability.
///
/// `values[k]` applies from `breakpoints[k]` up to the next breakpoint.
/// Inputs below the first breakpoint take the first value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsotonicMap<T> {
    pub breakpoints: Vec<T>,
    pub values: Vec<T>,
}

impl<T: Scalar> IsotonicMap<T> {
    pub fn apply(&self, score: T) -> T {
        let k = self.breakpoints.partition_point(|&b| b <= score);
        self.values[k.saturating_sub(1)]
    }
}

struct Block<T> {
    sum: T,
    weight: T,
    /// First distinct-score index covered.
    start: usize,
}

/// Pool-adjacent-violators fit of labels against scores.
///
/// Equal scores are pooled before the pass, so the map has one step per
/// distinct calibration score.
pub fn isotonic_fit<T: Scalar>(calib: &ScoredDataset<T>) -> IsotonicMap<T> {
    let mut pairs: Vec<(T, T)> = calib.samples().iter().map(|s| (s.score, s.label_value())).collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("scores are finite"));

    let mut breakpoints: Vec<T> = Vec::new();
    let mut level_sums: Vec<(T, T)> = Vec::new();
    for (s, y) in pairs {
        match breakpoints.last() {
            Some(&last) if last == s => {
                let acc = level_sums.last_mut().expect("parallel vectors");
                acc.0 = acc.0 + y;
                acc.1 = acc.1 + T::one();
            }
            _ => {
                breakpoints.push(s);
                level_sums.push((y, T::one()));
            }
        }
    }

    let mut stack: Vec<Block<T>> = Vec::with_capacity(level_sums.len());
    for (start, &(sum, weight)) in level_sums.iter().enumerate() {
        let mut cur = Block { sum, weight, start };
        // pool while the previous block's mean exceeds the current one
        while let Some(prev) = stack.last() {
            if prev.sum * cur.weight > cur.sum * prev.weight {
                let prev = stack.pop().expect("checked non-empty");
                cur = Block { sum: prev.sum + cur.sum, weight: prev.weight + cur.weight, start: prev.start };
            } else {
                break;
            }
        }
        stack.push(cur);
    }

    let mut values = vec![T::zero(); breakpoints.len()];
    for (k, block) in stack.iter().enumerate() {
        let end = stack.get(k + 1).map_or(values.len(), |b| b.start);
        let mean = block.sum / block.weight;
        values[block.start..end].iter_mut().for_each(|v| *v = mean);
    }
    IsotonicMap { breakpoints, values }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fit(scores: &[f64], labels: &[bool]) -> IsotonicMap<f64> {
        isotonic_fit(&ScoredDataset::from_scores(scores, labels).unwrap())
    }

    #[test]
    fn monotone_labels_are_kept() {
        let m = fit(&[0.1, 0.2, 0.3], &[false, false, true]);
        assert_eq!(m.values, vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn violators_are_pooled() {
        let m = fit(&[0.1, 0.2, 0.3], &[true, false, true]);
        assert_eq!(m.values, vec![0.5, 0.5, 1.0]);
    }

    #[test]
    fn single_class_gives_constant_map() {
        let m = fit(&[0.4, 0.1, 0.9], &[true, true, true]);
        assert!(m.values.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn ties_are_pre_averaged() {
        let m = fit(&[0.2, 0.2, 0.5, 0.5, 0.5], &[true, false, false, false, true]);
        assert_eq!(m.breakpoints, vec![0.2, 0.5]);
        assert_eq!(m.values, vec![0.4, 0.4]);
    }

    #[test]
    fn apply_is_stepwise_and_clamped() {
        let m = fit(&[0.2, 0.4, 0.6], &[false, true, true]);
        assert_eq!(m.apply(0.0), 0.0);
        assert_eq!(m.apply(0.39), 0.0);
        assert_eq!(m.apply(0.4), 1.0);
        assert_eq!(m.apply(1.0), 1.0);
    }

    #[test]
    fn unsorted_input_is_handled() {
        let m = fit(&[0.9, 0.1, 0.5, 0.3], &[true, true, false, false]);
        assert_eq!(m.breakpoints, vec![0.1, 0.3, 0.5, 0.9]);
        assert_eq!(m.values, vec![1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 1.0]);
    }
}
