//! Sensor selection and dual-stage fusion.
//!
//! Candidate receivers are scored by the Cauchy-Schwarz divergence between
//! the predicted density and the posterior obtained from the predicted
//! ideal measurement set (PIMS): one noiseless, clutter-free measurement per
//! estimated target. Selected receivers are then fused with an
//! iterated-corrector update whose order is set by those scores.

use std::cell::Cell;
use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::divergence::{cs_divergence_prepared, GaussianGlmb, HypervolumeUnit};
use crate::error::{Error, Result};
use crate::filter::{update, FilterOutput, FilterParams};
use crate::radar::{ideal_measurement, Measurement, MeasurementMessage, RadarSensor};
use crate::rfs::GlmbDensity;

/// Upper bound on the ordered permutations exhaustive search will score.
pub const EXHAUSTIVE_LIMIT: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Greedy,
    Exhaustive,
    Random,
}

/// Order in which selected receivers are applied by the iterated corrector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionOrder {
    /// Ascending reward (lowest reward first).
    DualStage,
    /// The order the selection produced.
    Selected,
    /// Uniformly random order.
    Shuffled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub ordered_sensors: Vec<u32>,
    pub rewards: BTreeMap<u32, f64>,
    pub evaluations: u64,
}

/// Predicted ideal measurement set for one receiver.
pub fn pims(predicted: &GlmbDensity, sensor: &RadarSensor) -> Result<Vec<Measurement>> {
    predicted
        .extract_estimates()
        .iter()
        .map(|e| ideal_measurement(sensor.layout.position(&e.state), &sensor.receiver, &sensor.transmitter))
        .collect()
}

/// Scores receivers against one predicted density, counting every reward
/// evaluation.
pub struct RewardEvaluator<'a> {
    predicted: &'a GlmbDensity,
    prior: GaussianGlmb,
    params: FilterParams,
    unit: HypervolumeUnit,
    evaluations: Cell<u64>,
}

impl<'a> RewardEvaluator<'a> {
    pub fn new(predicted: &'a GlmbDensity, params: &FilterParams) -> Self {
        Self {
            predicted,
            prior: GaussianGlmb::new(predicted),
            // PIMS posteriors are only summarized, never propagated.
            params: FilterParams {
                resample_threshold: 0.0,
                ..*params
            },
            unit: HypervolumeUnit::default(),
            evaluations: Cell::new(0),
        }
    }

    pub fn evaluations(&self) -> u64 {
        self.evaluations.get()
    }

    /// Divergence between the prediction and the posterior after applying
    /// each sensor's PIMS in turn.
    fn score_sequence(&self, sensors: &[&RadarSensor]) -> Result<f64> {
        // Resampling is disabled, so this generator is never drawn from.
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut posterior: Option<GlmbDensity> = None;
        for sensor in sensors {
            let z = pims(self.predicted, sensor)?;
            let current = posterior.as_ref().unwrap_or(self.predicted);
            posterior = Some(update(current, &z, *sensor, &self.params, &mut rng)?.density);
        }
        let posterior = posterior.unwrap_or_else(|| self.predicted.clone());
        cs_divergence_prepared(&self.prior, &GaussianGlmb::new(&posterior), self.unit)
    }

    /// Counted evaluation of the reward of one receiver.
    pub fn reward(&self, sensor: &RadarSensor) -> Result<f64> {
        self.evaluations.set(self.evaluations.get() + 1);
        self.score_sequence(&[sensor])
    }

    /// Counted evaluation of an ordered receiver sequence.
    pub fn sequence_reward(&self, sensors: &[&RadarSensor]) -> Result<f64> {
        self.evaluations.set(self.evaluations.get() + 1);
        self.score_sequence(sensors)
    }
}

/// Single-receiver reward: CS divergence between the prediction and its
/// PIMS posterior.
pub fn reward(predicted: &GlmbDensity, sensor: &RadarSensor, params: &FilterParams) -> Result<f64> {
    RewardEvaluator::new(predicted, params).reward(sensor)
}

fn check_count(p: usize, n: usize) -> Result<()> {
    if p == 0 || p > n {
        return Err(Error::Selection(format!("cannot select {p} of {n} sensors")));
    }
    Ok(())
}

fn by_id(candidates: &[RadarSensor]) -> Vec<&RadarSensor> {
    let mut sorted: Vec<&RadarSensor> = candidates.iter().collect();
    sorted.sort_by_key(|s| s.id());
    sorted
}

/// Sequential greedy selection: `p` rounds, each picking the unselected
/// receiver with the largest reward against the same predicted density
/// (ties go to the lower id).
pub fn select_greedy(
    predicted: &GlmbDensity,
    candidates: &[RadarSensor],
    p: usize,
    params: &FilterParams,
) -> Result<SelectionResult> {
    check_count(p, candidates.len())?;
    let eval = RewardEvaluator::new(predicted, params);
    let sorted = by_id(candidates);
    let mut chosen = vec![false; sorted.len()];
    let mut result = SelectionResult {
        ordered_sensors: Vec::with_capacity(p),
        rewards: BTreeMap::new(),
        evaluations: 0,
    };
    for _ in 0..p {
        let mut round: Vec<(usize, f64)> = Vec::new();
        for (i, s) in sorted.iter().enumerate() {
            if !chosen[i] {
                round.push((i, eval.reward(s)?));
            }
        }
        let (best, best_reward) = round
            .iter()
            .copied()
            .fold(None, |acc: Option<(usize, f64)>, (i, r)| match acc {
                Some((_, br)) if r <= br => acc,
                _ => Some((i, r)),
            })
            .expect("at least one unselected candidate");
        assert!(
            round.iter().all(|&(_, r)| r <= best_reward),
            "greedy round picked a non-maximal reward"
        );
        chosen[best] = true;
        result.ordered_sensors.push(sorted[best].id());
        result.rewards.insert(sorted[best].id(), best_reward);
    }
    result.evaluations = eval.evaluations();
    Ok(result)
}

/// Number of ordered `p`-permutations of `n` items, saturating.
pub fn permutation_count(n: usize, p: usize) -> u64 {
    (0..p).fold(1u64, |acc, j| acc.saturating_mul((n - j) as u64))
}

/// Exhaustive search over ordered `p`-permutations, each scored through the
/// full sequential PIMS update in its own order. Rewards of the winner are
/// the divergences after each prefix of its order.
pub fn select_exhaustive(
    predicted: &GlmbDensity,
    candidates: &[RadarSensor],
    p: usize,
    params: &FilterParams,
) -> Result<SelectionResult> {
    check_count(p, candidates.len())?;
    let count = permutation_count(candidates.len(), p);
    if count > EXHAUSTIVE_LIMIT {
        return Err(Error::Selection(format!(
            "exhaustive search over {count} permutations exceeds the limit of {EXHAUSTIVE_LIMIT}"
        )));
    }
    let eval = RewardEvaluator::new(predicted, params);
    let sorted = by_id(candidates);
    let mut best: Option<(Vec<usize>, f64)> = None;
    let mut current = Vec::with_capacity(p);
    let mut used = vec![false; sorted.len()];

    fn recurse(
        sorted: &[&RadarSensor],
        p: usize,
        current: &mut Vec<usize>,
        used: &mut [bool],
        eval: &RewardEvaluator<'_>,
        best: &mut Option<(Vec<usize>, f64)>,
    ) -> Result<()> {
        if current.len() == p {
            let seq: Vec<&RadarSensor> = current.iter().map(|&i| sorted[i]).collect();
            let r = eval.sequence_reward(&seq)?;
            if best.as_ref().is_none_or(|(_, br)| r > *br) {
                *best = Some((current.clone(), r));
            }
            return Ok(());
        }
        for i in 0..sorted.len() {
            if used[i] {
                continue;
            }
            used[i] = true;
            current.push(i);
            recurse(sorted, p, current, used, eval, best)?;
            current.pop();
            used[i] = false;
        }
        Ok(())
    }
    recurse(&sorted, p, &mut current, &mut used, &eval, &mut best)?;
    let (winner, total) = best.expect("at least one permutation");
    let evaluations = eval.evaluations();

    let mut rewards = BTreeMap::new();
    let seq: Vec<&RadarSensor> = winner.iter().map(|&i| sorted[i]).collect();
    for k in 1..p {
        rewards.insert(seq[k - 1].id(), eval.score_sequence(&seq[..k])?);
    }
    rewards.insert(seq[p - 1].id(), total);
    Ok(SelectionResult {
        ordered_sensors: seq.iter().map(|s| s.id()).collect(),
        rewards,
        evaluations,
    })
}

/// Uniform random `p`-subset. Rewards are still computed for the chosen
/// receivers so that they can be ranked for fusion.
pub fn select_random(
    predicted: &GlmbDensity,
    candidates: &[RadarSensor],
    p: usize,
    params: &FilterParams,
    rng: &mut dyn RngCore,
) -> Result<SelectionResult> {
    check_count(p, candidates.len())?;
    let sorted = by_id(candidates);
    let picks = sample(rng, sorted.len(), p);
    let eval = RewardEvaluator::new(predicted, params);
    let mut result = SelectionResult {
        ordered_sensors: Vec::with_capacity(p),
        rewards: BTreeMap::new(),
        evaluations: 0,
    };
    for i in picks.iter() {
        let s = sorted[i];
        result.ordered_sensors.push(s.id());
        result.rewards.insert(s.id(), eval.reward(s)?);
    }
    result.evaluations = eval.evaluations();
    Ok(result)
}

/// Selected receivers sorted by ascending reward (ties: lower id first).
pub fn dual_stage_order(selection: &SelectionResult) -> Vec<u32> {
    let mut order = selection.ordered_sensors.clone();
    order.sort_by(|a, b| {
        let (ra, rb) = (selection.rewards[a], selection.rewards[b]);
        ra.total_cmp(&rb).then(a.cmp(b))
    });
    order
}

/// Iterated-corrector update applying the receivers in `order`.
pub fn fuse_in_order(
    predicted: &GlmbDensity,
    order: &[u32],
    message: &MeasurementMessage,
    sensors: &[RadarSensor],
    params: &FilterParams,
    rng: &mut dyn RngCore,
) -> Result<FilterOutput> {
    let mut current = FilterOutput {
        density: predicted.clone(),
        discarded_mass: 0.0,
    };
    for id in order {
        let sensor = sensors
            .iter()
            .find(|s| s.id() == *id)
            .ok_or_else(|| Error::Selection(format!("unknown receiver {id}")))?;
        let z = message.sets.get(id).ok_or(Error::MissingMeasurements(*id))?;
        let next = update(&current.density, z, sensor, params, rng)?;
        current = FilterOutput {
            density: next.density,
            discarded_mass: current.discarded_mass.max(next.discarded_mass),
        };
    }
    Ok(current)
}

/// Dual-stage fusion: rank the selected receivers by ascending reward, then
/// run the iterated corrector in that order.
pub fn dual_stage_fuse(
    predicted: &GlmbDensity,
    selection: &SelectionResult,
    message: &MeasurementMessage,
    sensors: &[RadarSensor],
    params: &FilterParams,
    rng: &mut dyn RngCore,
) -> Result<FilterOutput> {
    fuse_in_order(predicted, &dual_stage_order(selection), message, sensors, params, rng)
}

/// Fusion with an explicit ordering policy.
pub fn fuse(
    predicted: &GlmbDensity,
    selection: &SelectionResult,
    message: &MeasurementMessage,
    sensors: &[RadarSensor],
    order: FusionOrder,
    params: &FilterParams,
    rng: &mut dyn RngCore,
) -> Result<FilterOutput> {
    let ids = match order {
        FusionOrder::DualStage => dual_stage_order(selection),
        FusionOrder::Selected => selection.ordered_sensors.clone(),
        FusionOrder::Shuffled => {
            let mut ids = selection.ordered_sensors.clone();
            ids.shuffle(rng);
            ids
        }
    };
    fuse_in_order(predicted, &ids, message, sensors, params, rng)
}
