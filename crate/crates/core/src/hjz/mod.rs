//! Multicalibration as a repeated game.
//!
//! The adversary plays distributions over signed violation events
//! `(group, bin, ±1)`; an event's payoff is `s · (1/n) · Σ_{i ∈ g, bin(v_i) = b} (y_i − v_i)`.
//! The learner receives per-sample feedback
//! `d_i = Σ_c p_t(c) · s_c · 1[i ∈ g_c, bin(v_i) = b_c]` and proposes new
//! scores:
//!
//! - gradient descent: `u_i = clip(v_i + η_t d_i)`;
//! - hedge, prod, optimistic hedge: each sample keeps weights over the bin
//!   midpoints, updated with gains `d_i · value_j`; the proposal moves `v_i`
//!   by the change in the weighted mean.
//!
//! Proposals are realized category by category (groups in order, bins
//! ascending, on the partially updated scores) as mean shifts, and each
//! realized shift is logged as a [`Patch`]. The log therefore replays the
//! fitted calibration scores exactly. The adversary always observes payoffs
//! of the scores *before* the learner's move.

mod online;

pub use online::{online_update, OnlineAlgorithm};

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::data::{GroupCollection, ScoredDataset};
use crate::error::{Error, Result};
use crate::patch::{BinGrid, Patch, PatchedPredictor, Provenance, DEFAULT_LAMBDA};
use crate::scalar::{clip_unit, Scalar};

pub const LEARNER_DECAYS: [f64; 2] = [0.9, 0.95];
pub const ADVERSARY_DECAYS: [f64; 3] = [0.9, 0.95, 0.98];
pub const DEFAULT_ROUNDS: usize = 30;

/// Shifts at or below this magnitude are not realized.
const NEGLIGIBLE_SHIFT: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Learner {
    Hedge,
    Prod,
    OptimisticHedge,
    GradientDescent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Adversary {
    BestResponse,
    Hedge,
    OptimisticHedge,
}

impl Learner {
    fn algorithm(self) -> OnlineAlgorithm {
        match self {
            Learner::Hedge => OnlineAlgorithm::Hedge,
            Learner::Prod => OnlineAlgorithm::Prod,
            Learner::OptimisticHedge => OnlineAlgorithm::OptimisticHedge,
            Learner::GradientDescent => OnlineAlgorithm::GradientDescent,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Learner::Hedge => "hedge",
            Learner::Prod => "prod",
            Learner::OptimisticHedge => "optimistic_hedge",
            Learner::GradientDescent => "gradient_descent",
        }
    }
}

impl Adversary {
    pub fn name(self) -> &'static str {
        match self {
            Adversary::BestResponse => "best_response",
            Adversary::Hedge => "hedge",
            Adversary::OptimisticHedge => "optimistic_hedge",
        }
    }
}

/// The six supported (learner, adversary) pairings: every learner against a
/// best-responding adversary, plus hedge and optimistic hedge self-play.
pub const ALGORITHMS: [(Learner, Adversary); 6] = [
    (Learner::Hedge, Adversary::BestResponse),
    (Learner::Prod, Adversary::BestResponse),
    (Learner::OptimisticHedge, Adversary::BestResponse),
    (Learner::GradientDescent, Adversary::BestResponse),
    (Learner::Hedge, Adversary::Hedge),
    (Learner::OptimisticHedge, Adversary::OptimisticHedge),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HjzConfig {
    pub learner: Learner,
    pub adversary: Adversary,
    pub learner_decay: f64,
    pub adversary_decay: f64,
    pub rounds: usize,
    pub lambda: f64,
    pub eta0_learner: f64,
    pub eta0_adversary: f64,
}

impl HjzConfig {
    pub fn new(learner: Learner, adversary: Adversary) -> Self {
        Self {
            learner,
            adversary,
            learner_decay: LEARNER_DECAYS[0],
            adversary_decay: ADVERSARY_DECAYS[0],
            rounds: DEFAULT_ROUNDS,
            lambda: DEFAULT_LAMBDA,
            eta0_learner: 1.0,
            eta0_adversary: 1.0,
        }
    }

    pub fn with_decays(mut self, learner: f64, adversary: f64) -> Self {
        self.learner_decay = learner;
        self.adversary_decay = adversary;
        self
    }

    pub fn validate(&self) -> Result<BinGrid> {
        if !ALGORITHMS.contains(&(self.learner, self.adversary)) {
            return Err(Error::Config(format!(
                "unsupported pairing: learner {} with adversary {}",
                self.learner.name(),
                self.adversary.name()
            )));
        }
        for (name, d) in [("learner_decay", self.learner_decay), ("adversary_decay", self.adversary_decay)] {
            if !(d > 0.0 && d <= 1.0) {
                return Err(Error::Config(format!("{name} {d} must lie in (0, 1]")));
            }
        }
        if !(self.eta0_learner > 0.0 && self.eta0_adversary > 0.0) {
            return Err(Error::Config("initial learning rates must be positive".into()));
        }
        if self.rounds == 0 {
            return Err(Error::Config("rounds must be positive".into()));
        }
        BinGrid::from_width(self.lambda)
    }

    /// Best-response adversaries keep no weights, so their decay is inert.
    pub fn uses_adversary_decay(&self) -> bool {
        self.adversary != Adversary::BestResponse
    }
}

impl fmt::Display for HjzConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "hjz({}/{},ld={}", self.learner.name(), self.adversary.name(), self.learner_decay)?;
        if self.uses_adversary_decay() {
            write!(f, ",ad={}", self.adversary_decay)?;
        }
        write!(f, ")")
    }
}

/// Every algorithm against every decay pair, before deduplication (36 entries).
pub fn full_grid() -> Vec<HjzConfig> {
    let mut out = Vec::new();
    for &(l, a) in &ALGORITHMS {
        for &ld in &LEARNER_DECAYS {
            for &ad in &ADVERSARY_DECAYS {
                out.push(HjzConfig::new(l, a).with_decays(ld, ad));
            }
        }
    }
    out
}

/// The sweep grid with best-response duplicates removed (20 entries).
pub fn sweep_grid() -> Vec<HjzConfig> {
    let mut out: Vec<HjzConfig> = Vec::new();
    for mut cfg in full_grid() {
        if !cfg.uses_adversary_decay() {
            cfg.adversary_decay = ADVERSARY_DECAYS[0];
        }
        if !out.contains(&cfg) {
            out.push(cfg);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Event {
    pub group: usize,
    pub bin: usize,
    /// +1 or −1.
    pub sign: i8,
}

/// Enumerates `groups × bins × {+1, −1}` as `((g · bins) + b) · 2 + (0 for +, 1 for −)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EventSpace {
    pub groups: usize,
    pub bins: usize,
}

impl EventSpace {
    pub fn len(&self) -> usize {
        2 * self.groups * self.bins
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, group: usize, bin: usize, positive: bool) -> usize {
        (group * self.bins + bin) * 2 + usize::from(!positive)
    }

    pub fn event(&self, index: usize) -> Event {
        let cat = index / 2;
        Event { group: cat / self.bins, bin: cat % self.bins, sign: if index % 2 == 0 { 1 } else { -1 } }
    }
}

fn payoffs_from_members<T: Scalar>(
    scores: &[T],
    labels: &[T],
    members: &[Vec<usize>],
    grid: BinGrid,
) -> Vec<T> {
    let space = EventSpace { groups: members.len(), bins: grid.bins() };
    let n = T::of_usize(scores.len());
    let mut out = vec![T::zero(); space.len()];
    for (g, list) in members.iter().enumerate() {
        let mut sums = vec![T::zero(); grid.bins()];
        for &i in list {
            let b = grid.index(scores[i]);
            sums[b] = sums[b] + (labels[i] - scores[i]);
        }
        for (b, s) in sums.into_iter().enumerate() {
            let p = s / n;
            out[space.index(g, b, true)] = p;
            out[space.index(g, b, false)] = -p;
        }
    }
    out
}

/// Payoff of every event under the current scores.
pub fn event_payoffs<T: Scalar>(
    scores: &[T],
    labels: &[bool],
    groups: &GroupCollection,
    lambda: T,
) -> Result<Vec<T>> {
    if scores.len() != labels.len() {
        return Err(Error::Argument("scores and labels differ in length".into()));
    }
    groups.check_matches(scores.len())?;
    let grid = BinGrid::from_width(lambda)?;
    let y: Vec<T> = labels.iter().map(|&l| if l { T::one() } else { T::zero() }).collect();
    Ok(payoffs_from_members(scores, &y, &groups.member_lists(), grid))
}

/// What happened in one round of [`hjz_fit_traced`].
#[derive(Debug, Clone, PartialEq)]
pub struct HjzRound<T> {
    pub eta_learner: T,
    pub eta_adversary: T,
    /// Payoffs observed before the learner moved.
    pub payoffs: Vec<T>,
    /// The adversary's play `p_t`. All zeros when a best responder abstains.
    pub adversary_play: Vec<T>,
    /// Hedge-style adversary weights after the update.
    pub adversary_weights: Option<Vec<T>>,
    pub selected_event: Option<usize>,
    pub patches_added: usize,
}

/// A fitted predictor together with the calibration-set trajectory.
#[derive(Debug, Clone)]
pub struct HjzFit<T> {
    pub predictor: PatchedPredictor<T>,
    /// Calibration scores after the final round.
    pub fitted_scores: Vec<T>,
    pub rounds: Vec<HjzRound<T>>,
}

pub fn hjz_fit<T: Scalar>(
    calib: &ScoredDataset<T>,
    groups: &GroupCollection,
    cfg: &HjzConfig,
) -> Result<PatchedPredictor<T>> {
    hjz_fit_traced(calib, groups, cfg).map(|f| f.predictor)
}

pub fn hjz_fit_traced<T: Scalar>(
    calib: &ScoredDataset<T>,
    groups: &GroupCollection,
    cfg: &HjzConfig,
) -> Result<HjzFit<T>> {
    let grid = cfg.validate()?;
    groups.check_matches(calib.len())?;
    let n = calib.len();
    let bins = grid.bins();
    let members = groups.member_lists();
    let masks = groups.masks();
    let masks = if masks.is_empty() { vec![Default::default(); n] } else { masks };
    let space = EventSpace { groups: members.len(), bins };
    let labels = calib.label_values();
    let mut scores = calib.scores();

    let centers: Vec<T> = grid.centers();
    let multiplicative = cfg.learner != Learner::GradientDescent;
    let mut learner_weights = if multiplicative { vec![T::one() / T::of_usize(bins); n * bins] } else { Vec::new() };
    let mut learner_prev = vec![T::zero(); if multiplicative { n } else { 0 }];
    let mut adversary_weights =
        (cfg.adversary != Adversary::BestResponse).then(|| vec![T::one() / T::of_usize(space.len()); space.len()]);
    let mut adversary_prev: Option<Vec<T>> = None;

    let mut patches = Vec::new();
    let mut trace = Vec::with_capacity(cfg.rounds);
    let mut feedback = vec![T::zero(); n];
    let mut proposal = vec![T::zero(); n];
    let mut gains = vec![T::zero(); bins];
    let mut prev_gains = vec![T::zero(); bins];

    for t in 1..=cfg.rounds {
        let eta_l = T::of(cfg.eta0_learner * cfg.learner_decay.powi(t as i32));
        let eta_a = T::of(cfg.eta0_adversary * cfg.adversary_decay.powi(t as i32));
        let payoffs = payoffs_from_members(&scores, &labels, &members, grid);

        // adversary move
        let mut play = vec![T::zero(); space.len()];
        let mut selected = None;
        match cfg.adversary {
            Adversary::BestResponse => {
                let mut best = 0;
                for (c, &p) in payoffs.iter().enumerate() {
                    if p > payoffs[best] {
                        best = c;
                    }
                }
                if payoffs.get(best).is_some_and(|&p| p > T::zero()) {
                    play[best] = T::one();
                    selected = Some(best);
                }
            }
            Adversary::Hedge | Adversary::OptimisticHedge => {
                let w = adversary_weights.as_mut().expect("weights exist for no-regret adversaries");
                let alg = if cfg.adversary == Adversary::Hedge {
                    OnlineAlgorithm::Hedge
                } else {
                    OnlineAlgorithm::OptimisticHedge
                };
                if !w.is_empty() {
                    online_update(w, &payoffs, adversary_prev.as_deref(), alg, eta_a)?;
                }
                play.copy_from_slice(w);
                adversary_prev = Some(payoffs.clone());
            }
        }

        // per-category net weight p(g, b, +) − p(g, b, −)
        let category_weight: Vec<T> = (0..space.len() / 2).map(|c| play[2 * c] - play[2 * c + 1]).collect();
        for i in 0..n {
            let b = grid.index(scores[i]);
            feedback[i] = masks[i].iter().map(|g| category_weight[g * bins + b]).fold(T::zero(), |a, x| a + x);
        }

        // learner proposal
        if multiplicative {
            let alg = cfg.learner.algorithm();
            for i in 0..n {
                let d = feedback[i];
                let prev = learner_prev[i];
                proposal[i] = scores[i];
                if d == T::zero() && prev == T::zero() {
                    continue;
                }
                let w = &mut learner_weights[i * bins..(i + 1) * bins];
                let before: T = w.iter().zip(&centers).map(|(&w, &c)| w * c).sum();
                for j in 0..bins {
                    gains[j] = d * centers[j];
                    prev_gains[j] = prev * centers[j];
                }
                online_update(w, &gains, Some(&prev_gains), alg, eta_l)?;
                let after: T = w.iter().zip(&centers).map(|(&w, &c)| w * c).sum();
                proposal[i] = clip_unit(scores[i] + (after - before));
                learner_prev[i] = d;
            }
        } else {
            for i in 0..n {
                proposal[i] = clip_unit(scores[i] + eta_l * feedback[i]);
            }
        }

        // realize the proposal as category mean shifts
        let before_len = patches.len();
        let negligible = T::of(NEGLIGIBLE_SHIFT);
        let mut cat: Vec<usize> = Vec::new();
        for (g, list) in members.iter().enumerate() {
            for b in 0..bins {
                cat.clear();
                cat.extend(list.iter().copied().filter(|&i| grid.index(scores[i]) == b));
                if cat.is_empty() {
                    continue;
                }
                let total: T = cat.iter().map(|&i| proposal[i] - scores[i]).sum();
                let shift = total / T::of_usize(cat.len());
                if shift.abs() <= negligible {
                    continue;
                }
                for &i in &cat {
                    scores[i] = clip_unit(scores[i] + shift);
                }
                patches.push(Patch { group_index: g, bin_index: b, shift });
            }
        }

        trace.push(HjzRound {
            eta_learner: eta_l,
            eta_adversary: eta_a,
            payoffs,
            adversary_play: play,
            adversary_weights: adversary_weights.clone(),
            selected_event: selected,
            patches_added: patches.len() - before_len,
        });
    }

    let provenance = Provenance::new("hjz")
        .param("learner", cfg.learner.name())
        .param("adversary", cfg.adversary.name())
        .param("learner_decay", cfg.learner_decay)
        .param("adversary_decay", cfg.adversary_decay)
        .param("rounds", cfg.rounds)
        .param("lambda", cfg.lambda)
        .param("eta0_learner", cfg.eta0_learner)
        .param("eta0_adversary", cfg.eta0_adversary);
    let predictor = PatchedPredictor { lambda: T::of(cfg.lambda), patches, provenance, converged: true };
    Ok(HjzFit { predictor, fitted_scores: scores, rounds: trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Group, GroupMask, ScoredSample};
    use crate::rng::SplitMix64;

    #[test]
    fn grid_sizes() {
        assert_eq!(full_grid().len(), 36);
        let grid = sweep_grid();
        assert_eq!(grid.len(), 20);
        assert_eq!(grid.iter().filter(|c| c.adversary == Adversary::BestResponse).count(), 8);
        let ids: std::collections::BTreeSet<String> = grid.iter().map(|c| c.to_string()).collect();
        assert_eq!(ids.len(), 20);
    }

    #[test]
    fn rejects_unsupported_pairings() {
        let cfg = HjzConfig::new(Learner::Prod, Adversary::Hedge);
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        assert!(HjzConfig::new(Learner::Hedge, Adversary::Hedge).validate().is_ok());
    }

    #[test]
    fn event_space_indexing() {
        let s = EventSpace { groups: 3, bins: 10 };
        assert_eq!(s.len(), 60);
        for i in 0..s.len() {
            let e = s.event(i);
            assert_eq!(s.index(e.group, e.bin, e.sign > 0), i);
        }
    }

    #[test]
    fn payoff_examples() {
        let g = GroupCollection::whole_population(4);
        let p = event_payoffs(&[0.32f64; 4], &[true, true, true, false], &g, 0.1).unwrap();
        let s = EventSpace { groups: 1, bins: 10 };
        assert!((p[s.index(0, 3, true)] - 0.43).abs() < 1e-12);
        assert!((p[s.index(0, 3, false)] + 0.43).abs() < 1e-12);
        let exact = event_payoffs(&[1.0f64, 0.0], &[true, false], &GroupCollection::whole_population(2), 0.1).unwrap();
        assert!(exact.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn samples_outside_a_group_do_not_count() {
        let g = GroupCollection::new(
            vec![Group { name: "a".into(), predicate: String::new(), members: vec![true, false] }],
            0.0,
        )
        .unwrap();
        let p = event_payoffs(&[0.5f64, 0.5], &[true, false], &g, 0.1).unwrap();
        let s = EventSpace { groups: 1, bins: 10 };
        assert!((p[s.index(0, 5, true)] - 0.25).abs() < 1e-12);
    }

    fn one_group(scores: &[f64], labels: &[bool]) -> (ScoredDataset<f64>, GroupCollection) {
        let samples = scores
            .iter()
            .zip(labels)
            .map(|(&s, &y)| ScoredSample::new(s, y).with_groups(GroupMask::from_indices([0])))
            .collect();
        (ScoredDataset::new(samples, vec!["all".into()]).unwrap(), GroupCollection::whole_population(scores.len()))
    }

    #[test]
    fn zero_violation_is_a_fixed_point_for_all_pairs() {
        let (d, g) = one_group(&[0.0, 1.0, 1.0, 0.0, 1.0], &[false, true, true, false, true]);
        for &(l, a) in &ALGORITHMS {
            let p = hjz_fit(&d, &g, &HjzConfig::new(l, a)).unwrap();
            assert!(p.patches.is_empty(), "{l:?}/{a:?}");
            assert_eq!(p.predict(&d).unwrap(), d.scores());
        }
    }

    #[test]
    fn scalar_recurrence_matches_hand_simulation() {
        let labels: Vec<bool> = (0..10).map(|i| i < 9).collect();
        let (d, g) = one_group(&[0.32; 10], &labels);
        let cfg = HjzConfig::new(Learner::GradientDescent, Adversary::BestResponse);
        let p = hjz_fit(&d, &g, &cfg).unwrap();
        let mut v = 0.32f64;
        for t in 1..=30 {
            let r = 0.9 - v;
            if r == 0.0 {
                continue;
            }
            v = (v + 0.9f64.powi(t) * r.signum()).clamp(0.0, 1.0);
        }
        for x in p.predict(&d).unwrap() {
            assert!((x - v).abs() < 1e-9, "{x} vs {v}");
        }
        assert!((0.9 - v).abs() < 0.58);
    }

    #[test]
    fn best_response_selects_maximal_payoff() {
        let mut rng = SplitMix64::new(4);
        let n = 40;
        let samples: Vec<ScoredSample<f64>> = (0..n)
            .map(|i| {
                ScoredSample::new(rng.next_f64(), rng.bernoulli(0.6))
                    .with_groups(GroupMask::from_indices((0..2).filter(|g| (i + g) % 3 != 0)))
            })
            .collect();
        let d = ScoredDataset::new(samples, vec!["a".into(), "b".into()]).unwrap();
        let g = GroupCollection::from_dataset(&d);
        for learner in [Learner::Hedge, Learner::GradientDescent] {
            let fit = hjz_fit_traced(&d, &g, &HjzConfig::new(learner, Adversary::BestResponse)).unwrap();
            for round in &fit.rounds {
                if let Some(sel) = round.selected_event {
                    assert!(round.payoffs.iter().all(|&p| p <= round.payoffs[sel]));
                    assert!(round.payoffs[..sel].iter().all(|&p| p < round.payoffs[sel]));
                }
            }
        }
    }

    #[test]
    fn replay_reproduces_fitted_scores_for_every_pair() {
        let mut rng = SplitMix64::new(21);
        let n = 300;
        let samples: Vec<ScoredSample<f64>> = (0..n)
            .map(|_| {
                let s = rng.next_f64();
                let mut m = GroupMask::EMPTY;
                for g in 0..3 {
                    if rng.bernoulli(0.5) {
                        m.insert(g);
                    }
                }
                ScoredSample::new(s, rng.bernoulli((s + 0.2).min(1.0))).with_groups(m)
            })
            .collect();
        let d = ScoredDataset::new(samples, vec!["a".into(), "b".into(), "c".into()]).unwrap();
        let g = GroupCollection::from_dataset(&d);
        for &(l, a) in &ALGORITHMS {
            let fit = hjz_fit_traced(&d, &g, &HjzConfig::new(l, a).with_decays(0.95, 0.98)).unwrap();
            let total: usize = fit.rounds.iter().map(|r| r.patches_added).sum();
            assert_eq!(total, fit.predictor.patches.len());
            assert_eq!(fit.predictor.predict(&d).unwrap(), fit.fitted_scores, "{l:?}/{a:?}");
            assert!(fit.fitted_scores.iter().all(|v| (0.0..=1.0).contains(v)));
            for round in &fit.rounds {
                if let Some(w) = &round.adversary_weights {
                    assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                    assert!(w.iter().all(|&x| x >= 0.0));
                }
            }
        }
    }
}
