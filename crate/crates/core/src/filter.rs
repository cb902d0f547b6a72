//! Single-sensor delta-GLMB prediction and update with particle track
//! densities.
//!
//! Prediction enumerates (surviving subset, birth subset) pairs per prior
//! component in descending weight order and keeps the best
//! `max_components`. The update ranks association maps per component with
//! Murty's algorithm on the `-ln` of the per-label association terms.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, HashMap, HashSet};
use std::sync::Arc;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::assignment::{murty_k_best, CostMatrix};
use crate::error::{Error, Result};
use crate::models::{BirthModel, Dynamics, SurvivalModel};
use crate::rfs::{rank_order, GlmbComponent, GlmbDensity, Label, ParticleDensity};

/// Floor applied before taking logarithms of association terms.
pub const LOG_FLOOR: f64 = 1e-300;

/// Sensor model as seen by the update: detection probability, likelihood
/// and clutter intensity. `predict` caches whatever per-particle quantities
/// are shared by all measurements of a scan.
pub trait MeasurementModel: Sync {
    type Measurement: Clone + Send + Sync;
    type Predicted: Send + Sync;

    fn predict(&self, state: &[f64]) -> Self::Predicted;
    fn detection_probability(&self, pred: &Self::Predicted) -> f64;
    fn likelihood(&self, z: &Self::Measurement, pred: &Self::Predicted) -> f64;
    fn clutter_intensity(&self, z: &Self::Measurement) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterParams {
    /// Components kept after each prediction and update.
    pub max_components: usize,
    /// Association maps requested per unit of component weight.
    pub k_best_assignments: usize,
    /// Resample a track when its ESS falls below this fraction of its
    /// particle count. Zero disables resampling.
    pub resample_threshold: f64,
}

impl Default for FilterParams {
    fn default() -> Self {
        Self {
            max_components: 1000,
            k_best_assignments: 100,
            resample_threshold: 0.5,
        }
    }
}

impl FilterParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_components == 0 || self.k_best_assignments == 0 || !(self.resample_threshold >= 0.0) {
            return Err(Error::InvalidModel(
                "filter params need positive component and assignment budgets".into(),
            ));
        }
        Ok(())
    }
}

/// Label-to-measurement association; 0 means missed, `j > 0` means the
/// `j`-th measurement (1-based).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssociationMap(pub BTreeMap<Label, usize>);

impl AssociationMap {
    /// Builds the map from an assignment over the `n x (m + n)` cost layout
    /// used by [`update`].
    pub fn from_assignment(labels: &[Label], cols: &[usize], measurements: usize) -> Self {
        Self(
            labels
                .iter()
                .zip(cols)
                .map(|(l, &c)| (*l, if c < measurements { c + 1 } else { 0 }))
                .collect(),
        )
    }

    /// Positive values are pairwise distinct.
    pub fn is_injective(&self) -> bool {
        let mut seen = HashSet::new();
        self.0.values().filter(|&&j| j > 0).all(|j| seen.insert(*j))
    }
}

/// Density produced by a filter step together with the fraction of
/// enumerated weight discarded by truncation.
#[derive(Debug, Clone)]
pub struct FilterOutput {
    pub density: GlmbDensity,
    pub discarded_mass: f64,
}

/// Lazily enumerates subsets of independent binary items in descending
/// probability order. Item `i` is in with probability `p_in[i]`.
struct RankedSubsets {
    base: Vec<bool>,
    base_log: f64,
    /// (flip cost, item) sorted ascending; items whose minority option has
    /// probability zero are not flippable.
    flips: Vec<(f64, usize)>,
    heap: BinaryHeap<SubsetNode>,
    produced: Vec<(f64, Vec<bool>)>,
    started: bool,
}

#[derive(Debug, Clone)]
struct SubsetNode {
    cost: f64,
    /// Indices into `flips`, ascending.
    picks: Vec<usize>,
}

impl PartialEq for SubsetNode {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for SubsetNode {}
impl PartialOrd for SubsetNode {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for SubsetNode {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.picks.cmp(&self.picks))
    }
}

impl RankedSubsets {
    fn new(p_in: &[f64]) -> Self {
        let mut base = Vec::with_capacity(p_in.len());
        let mut base_log = 0.0;
        let mut flips = Vec::new();
        for (i, &p) in p_in.iter().enumerate() {
            let (keep, hi, lo) = if p >= 0.5 {
                (true, p, 1.0 - p)
            } else {
                (false, 1.0 - p, p)
            };
            base.push(keep);
            base_log += hi.ln();
            if lo > 0.0 {
                flips.push((hi.ln() - lo.ln(), i));
            }
        }
        flips.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        Self {
            base,
            base_log,
            flips,
            heap: BinaryHeap::new(),
            produced: Vec::new(),
            started: false,
        }
    }

    fn subset_for(&self, picks: &[usize]) -> Vec<bool> {
        let mut s = self.base.clone();
        for &k in picks {
            let item = self.flips[k].1;
            s[item] = !s[item];
        }
        s
    }

    /// `i`-th most probable subset as (log probability, membership).
    fn get(&mut self, i: usize) -> Option<&(f64, Vec<bool>)> {
        while self.produced.len() <= i {
            if !self.started {
                self.started = true;
                self.produced.push((self.base_log, self.base.clone()));
                if !self.flips.is_empty() {
                    self.heap.push(SubsetNode {
                        cost: self.flips[0].0,
                        picks: vec![0],
                    });
                }
                continue;
            }
            let node = self.heap.pop()?;
            let last = *node.picks.last().expect("non-empty pick set");
            if last + 1 < self.flips.len() {
                let mut add = node.picks.clone();
                add.push(last + 1);
                self.heap.push(SubsetNode {
                    cost: node.cost + self.flips[last + 1].0,
                    picks: add,
                });
                let mut swap = node.picks.clone();
                *swap.last_mut().expect("non-empty") = last + 1;
                self.heap.push(SubsetNode {
                    cost: node.cost - self.flips[last].0 + self.flips[last + 1].0,
                    picks: swap,
                });
            }
            let subset = self.subset_for(&node.picks);
            self.produced.push((self.base_log - node.cost, subset));
        }
        self.produced.get(i)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    log_weight: f64,
    comp: usize,
    surv: usize,
    birth: usize,
}

impl Eq for Candidate {}
impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.log_weight
            .total_cmp(&other.log_weight)
            .then_with(|| other.comp.cmp(&self.comp))
            .then_with(|| other.surv.cmp(&self.surv))
            .then_with(|| other.birth.cmp(&self.birth))
    }
}

fn track_key(p: &Arc<ParticleDensity>) -> usize {
    Arc::as_ptr(p) as usize
}

/// delta-GLMB prediction to time step `time` (births are labeled with it).
#[allow(clippy::too_many_arguments)]
pub fn predict<D: Dynamics + ?Sized>(
    prior: &GlmbDensity,
    time: u32,
    birth: &BirthModel,
    survival: &SurvivalModel,
    motion: &D,
    params: &FilterParams,
    rng: &mut dyn RngCore,
) -> Result<FilterOutput> {
    let dim = motion.dim();
    if let Some(t) = birth.terms.iter().find(|t| t.dim() != dim) {
        return Err(Error::Dimension {
            expected: dim,
            got: t.dim(),
        });
    }
    let births: Vec<(Label, Arc<ParticleDensity>, f64)> = birth
        .sample_birth(time, rng)
        .into_iter()
        .map(|(l, p, w)| (l, Arc::new(p), w))
        .collect();
    let mut birth_subsets = RankedSubsets::new(&births.iter().map(|b| b.2).collect::<Vec<_>>());

    let comps = prior.components();
    let mut survival_subsets: Vec<RankedSubsets> = comps
        .iter()
        .map(|c| RankedSubsets::new(&vec![survival.p_s; c.cardinality()]))
        .collect();

    // Order components by their best reachable weight so that the chain
    // (c, 0, 0) -> (c + 1, 0, 0) is non-increasing.
    let mut order: Vec<usize> = (0..comps.len()).filter(|&i| comps[i].weight > 0.0).collect();
    let head =
        |i: usize, s: &mut Vec<RankedSubsets>| comps[i].weight.ln() + s[i].get(0).map_or(f64::NEG_INFINITY, |x| x.0);
    let mut heads: Vec<f64> = (0..comps.len()).map(|i| head(i, &mut survival_subsets)).collect();
    order.sort_by(|&a, &b| {
        heads[b]
            .total_cmp(&heads[a])
            .then_with(|| rank_order(&comps[a], &comps[b]))
    });
    heads.clear();

    let birth_log0 = birth_subsets.get(0).map_or(0.0, |x| x.0);
    let mut frontier = BinaryHeap::new();
    let mut visited = HashSet::new();
    let mut kept: Vec<Candidate> = Vec::with_capacity(params.max_components);
    let weight_of =
        |pos: usize, s: usize, b: usize, ss: &mut Vec<RankedSubsets>, bs: &mut RankedSubsets| -> Option<f64> {
            let c = order[pos];
            let sl = ss[c].get(s)?.0;
            let bl = bs.get(b)?.0;
            Some(comps[c].weight.ln() + sl + bl)
        };
    if let Some(&first) = order.first() {
        let lw = comps[first].weight.ln() + survival_subsets[first].get(0).expect("base subset").0 + birth_log0;
        frontier.push(Candidate {
            log_weight: lw,
            comp: 0,
            surv: 0,
            birth: 0,
        });
        visited.insert((0usize, 0usize, 0usize));
    }
    while kept.len() < params.max_components {
        let Some(cand) = frontier.pop() else { break };
        kept.push(cand);
        let (p, s, b) = (cand.comp, cand.surv, cand.birth);
        let mut successors = vec![(p, s + 1, b), (p, s, b + 1)];
        if s == 0 && b == 0 && p + 1 < order.len() {
            successors.push((p + 1, 0, 0));
        }
        for (np, ns, nb) in successors {
            if visited.contains(&(np, ns, nb)) {
                continue;
            }
            if let Some(lw) = weight_of(np, ns, nb, &mut survival_subsets, &mut birth_subsets) {
                visited.insert((np, ns, nb));
                frontier.push(Candidate {
                    log_weight: lw,
                    comp: np,
                    surv: ns,
                    birth: nb,
                });
            }
        }
    }
    if kept.is_empty() {
        return Err(Error::Degenerate("prediction produced no components".into()));
    }

    let mut propagated: HashMap<usize, Arc<ParticleDensity>> = HashMap::new();
    let history_base = prior.max_history() + 1;
    let mut components = Vec::with_capacity(kept.len());
    for (h, cand) in kept.iter().enumerate() {
        let c = order[cand.comp];
        let comp = &comps[c];
        let surv = survival_subsets[c].get(cand.surv).expect("enumerated").1.clone();
        let bsub = birth_subsets.get(cand.birth).expect("enumerated").1.clone();
        let mut tracks = BTreeMap::new();
        for ((label, density), alive) in comp.tracks().iter().zip(&surv) {
            if !alive {
                continue;
            }
            let next = propagated
                .entry(track_key(density))
                .or_insert_with(|| {
                    Arc::new(density.propagate(dim, |x, out| motion.sample_transition(x, out, &mut *rng)))
                })
                .clone();
            tracks.insert(*label, next);
        }
        for ((label, density, _), born) in births.iter().zip(&bsub) {
            if *born {
                tracks.insert(*label, Arc::clone(density));
            }
        }
        components.push(GlmbComponent::new(history_base + h as u64, cand.log_weight, tracks));
    }
    finish(components)
}

/// Converts log weights to normalized weights and reports discarded mass
/// relative to the (normalized) prior, which sums to one.
fn finish(mut components: Vec<GlmbComponent>) -> Result<FilterOutput> {
    let max = components.iter().map(|c| c.weight).fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::Degenerate("all predicted weights vanish".into()));
    }
    let kept_mass: f64 = components.iter().map(|c| c.weight.exp()).sum();
    for c in &mut components {
        c.weight = (c.weight - max).exp();
    }
    let density = GlmbDensity::new(components)?.normalize()?;
    Ok(FilterOutput {
        density,
        discarded_mass: (1.0 - kept_mass).max(0.0),
    })
}

/// Per-track association terms for one scan.
struct TrackScores {
    /// `w_i (1 - p_D(x_i))` per particle.
    miss: Vec<f64>,
    /// `w_i p_D(x_i) g(z_j | x_i)` per measurement, per particle.
    detect: Vec<Vec<f64>>,
    log_miss: f64,
    log_detect: Vec<f64>,
}

fn score_track<S: MeasurementModel + ?Sized>(
    density: &ParticleDensity,
    measurements: &[S::Measurement],
    log_kappa: &[f64],
    sensor: &S,
) -> TrackScores {
    let n = density.len();
    let mut miss = Vec::with_capacity(n);
    let mut detect = vec![Vec::with_capacity(n); measurements.len()];
    for (x, w) in density.particles() {
        let pred = sensor.predict(x);
        let pd = sensor.detection_probability(&pred);
        miss.push(w * (1.0 - pd));
        for (z, row) in measurements.iter().zip(detect.iter_mut()) {
            row.push(w * pd * sensor.likelihood(z, &pred));
        }
    }
    let log_sum = |v: &[f64]| v.iter().sum::<f64>().max(LOG_FLOOR).ln();
    let log_miss = log_sum(&miss);
    let log_detect = detect
        .iter()
        .zip(log_kappa)
        .map(|(row, lk)| log_sum(row) - lk)
        .collect();
    TrackScores {
        miss,
        detect,
        log_miss,
        log_detect,
    }
}

/// delta-GLMB measurement update with one sensor's scan `measurements`.
pub fn update<S: MeasurementModel + ?Sized>(
    predicted: &GlmbDensity,
    measurements: &[S::Measurement],
    sensor: &S,
    params: &FilterParams,
    rng: &mut dyn RngCore,
) -> Result<FilterOutput> {
    let m = measurements.len();
    let log_kappa: Vec<f64> = measurements
        .iter()
        .map(|z| sensor.clutter_intensity(z).max(LOG_FLOOR).ln())
        .collect();

    let mut scores: HashMap<usize, TrackScores> = HashMap::new();
    struct Hyp {
        log_weight: f64,
        comp: usize,
        cols: Vec<usize>,
    }
    let mut hyps: Vec<Hyp> = Vec::new();
    let comps = predicted.components();
    for (ci, comp) in comps.iter().enumerate() {
        if comp.weight <= 0.0 {
            continue;
        }
        let n = comp.cardinality();
        let mut cost = CostMatrix::new(n, m + n, f64::INFINITY);
        for (i, density) in comp.tracks().values().enumerate() {
            let s = scores
                .entry(track_key(density))
                .or_insert_with(|| score_track(density, measurements, &log_kappa, sensor));
            for (j, ld) in s.log_detect.iter().enumerate() {
                cost.set(i, j, -ld);
            }
            cost.set(i, m + i, -s.log_miss);
        }
        let k = ((comp.weight * params.k_best_assignments as f64).ceil() as usize).max(1);
        for a in murty_k_best(&cost, k) {
            hyps.push(Hyp {
                log_weight: comp.weight.ln() - a.cost,
                comp: ci,
                cols: a.cols,
            });
        }
    }
    if hyps.is_empty() {
        return Err(Error::Degenerate("update produced no association hypotheses".into()));
    }

    let max = hyps.iter().map(|h| h.log_weight).fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::Degenerate("all posterior weights vanish".into()));
    }
    let total: f64 = hyps.iter().map(|h| (h.log_weight - max).exp()).sum();
    let mut ranked: Vec<usize> = (0..hyps.len()).collect();
    ranked.sort_by(|&a, &b| {
        hyps[b]
            .log_weight
            .total_cmp(&hyps[a].log_weight)
            .then_with(|| hyps[a].comp.cmp(&hyps[b].comp))
            .then_with(|| hyps[a].cols.cmp(&hyps[b].cols))
    });
    ranked.retain(|&i| (hyps[i].log_weight - max).exp() > 0.0);
    ranked.truncate(params.max_components);
    let kept: f64 = ranked.iter().map(|&i| (hyps[i].log_weight - max).exp()).sum();

    let mut children: HashMap<(usize, usize), Arc<ParticleDensity>> = HashMap::new();
    let history_base = predicted.max_history() + 1;
    let mut components = Vec::with_capacity(ranked.len());
    for (h, &hi) in ranked.iter().enumerate() {
        let hyp = &hyps[hi];
        let comp = &comps[hyp.comp];
        let mut tracks = BTreeMap::new();
        for ((label, density), &col) in comp.tracks().iter().zip(&hyp.cols) {
            let key = track_key(density);
            let slot = if col < m { col } else { m };
            let child = match children.get(&(key, slot)) {
                Some(c) => Arc::clone(c),
                None => {
                    let s = &scores[&key];
                    let w = if slot < m {
                        s.detect[slot].clone()
                    } else {
                        s.miss.clone()
                    };
                    let child = match density.with_weights(w) {
                        Ok(c) => c,
                        // Association term vanished on every particle: keep
                        // the predicted cloud rather than fail the step.
                        Err(_) => (**density).clone(),
                    };
                    let child = if params.resample_threshold > 0.0
                        && child.effective_sample_size() < params.resample_threshold * child.len() as f64
                    {
                        child.resample_systematic(&mut *rng)
                    } else {
                        child
                    };
                    let child = Arc::new(child);
                    children.insert((key, slot), Arc::clone(&child));
                    child
                }
            };
            tracks.insert(*label, child);
        }
        components.push(GlmbComponent::new(
            history_base + h as u64,
            (hyp.log_weight - max).exp(),
            tracks,
        ));
    }
    let density = GlmbDensity::new(components)?.normalize()?;
    Ok(FilterOutput {
        density,
        discarded_mass: (1.0 - kept / total).max(0.0),
    })
}
