//! Monte Carlo trials: predict, select, measure, fuse, score.

use std::time::{Duration, Instant};

use passive_glmb::metrics::{ospa, Ospa};
use passive_glmb::models::Dynamics;
use passive_glmb::radar::{generate_measurement_set, MeasurementMessage};
use passive_glmb::sensor::{fuse, select_exhaustive, select_greedy, select_random, SelectionResult, Strategy};
use passive_glmb::{predict, GlmbDensity, LabeledEstimate};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{Models, ScenarioConfig};
use crate::error::Result;
use crate::truth::{generate_truth, Truth};

const TRUTH_STREAM: u64 = 0;
const FILTER_STREAM: u64 = 1;
const SELECTION_STREAM: u64 = 2;
const MEASUREMENT_STREAM: u64 = 1 << 32;

fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Per-receiver, per-step measurement stream. A receiver's scan at step
/// `k` does not depend on which other receivers were selected.
fn measurement_rng(seed: u64, k: u32, receiver: u32) -> ChaCha8Rng {
    stream(
        seed,
        MEASUREMENT_STREAM | (u64::from(k) << 16) | u64::from(receiver & 0xffff),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub k: u32,
    pub estimates: Vec<LabeledEstimate>,
    pub truth: Vec<[f64; 2]>,
    pub ospa: Ospa,
    pub selected: Vec<u32>,
    /// Reward per selected receiver, in `selected` order.
    pub rewards: Vec<f64>,
    pub evaluations: u64,
    /// Largest weight fraction dropped by truncation in this step.
    pub discarded_mass: f64,
}

#[derive(Debug, Clone)]
pub struct TrialResult {
    pub trial: u32,
    pub seed: u64,
    pub steps: Vec<StepRecord>,
    /// Diagnostic when a numerical failure ended the trial early.
    pub aborted: Option<String>,
    pub wall_time: Duration,
}

impl TrialResult {
    pub fn evaluations(&self) -> u64 {
        self.steps.iter().map(|s| s.evaluations).sum()
    }

    /// Mean OSPA over the recorded steps.
    pub fn time_averaged_ospa(&self) -> f64 {
        self.steps.iter().map(|s| s.ospa.total).sum::<f64>() / self.steps.len().max(1) as f64
    }
}

fn select(
    predicted: &GlmbDensity,
    config: &ScenarioConfig,
    models: &Models,
    rng: &mut ChaCha8Rng,
) -> passive_glmb::Result<SelectionResult> {
    let p = config.selection.sensors;
    match config.selection.strategy {
        Strategy::Greedy => select_greedy(predicted, &models.sensors, p, &config.filter),
        Strategy::Exhaustive => select_exhaustive(predicted, &models.sensors, p, &config.filter),
        Strategy::Random => select_random(predicted, &models.sensors, p, &config.filter, rng),
    }
}

/// Runs one trial seeded with `base_seed + trial`.
pub fn run_trial(config: &ScenarioConfig, trial: u32) -> Result<TrialResult> {
    let models = config.build()?;
    let seed = config.base_seed.wrapping_add(u64::from(trial));
    let truth = generate_truth(config, &mut stream(seed, TRUTH_STREAM));
    Ok(run_trial_with_truth(config, &models, &truth, trial, seed))
}

fn run_trial_with_truth(config: &ScenarioConfig, models: &Models, truth: &Truth, trial: u32, seed: u64) -> TrialResult {
    let start = Instant::now();
    let mut filter_rng = stream(seed, FILTER_STREAM);
    let mut selection_rng = stream(seed, SELECTION_STREAM);
    let mut density = GlmbDensity::empty();
    let mut steps = Vec::with_capacity(config.duration as usize);
    let mut aborted = None;

    for k in 1..=config.duration {
        let positions = truth.positions(k);
        let step = (|| -> passive_glmb::Result<(StepRecord, GlmbDensity)> {
            let predicted = predict(
                &density,
                k,
                &models.birth,
                &models.survival,
                &models.motion,
                &config.filter,
                &mut filter_rng,
            )?;
            let selection = select(&predicted.density, config, models, &mut selection_rng)?;
            let mut message = MeasurementMessage::new(k);
            for &id in &selection.ordered_sensors {
                let sensor = models
                    .sensors
                    .iter()
                    .find(|s| s.id() == id)
                    .expect("selected from the network");
                let z = generate_measurement_set(&positions, sensor, &mut measurement_rng(seed, k, id))?;
                message.sets.insert(id, z);
            }
            let posterior = fuse(
                &predicted.density,
                &selection,
                &message,
                &models.sensors,
                config.selection.fusion_order,
                &config.filter,
                &mut selection_rng,
            )?;
            let estimates = posterior.density.extract_estimates();
            let est_positions: Vec<[f64; 2]> = estimates.iter().map(|e| models.motion.position(&e.state)).collect();
            let record = StepRecord {
                k,
                ospa: ospa(&est_positions, &positions, config.ospa),
                estimates,
                truth: positions.clone(),
                rewards: selection
                    .ordered_sensors
                    .iter()
                    .map(|id| selection.rewards[id])
                    .collect(),
                selected: selection.ordered_sensors,
                evaluations: selection.evaluations,
                discarded_mass: predicted.discarded_mass.max(posterior.discarded_mass),
            };
            Ok((record, posterior.density))
        })();
        match step {
            Ok((record, posterior)) => {
                steps.push(record);
                density = posterior;
            }
            Err(e) => {
                aborted = Some(format!("step {k}: {e}"));
                break;
            }
        }
    }
    TrialResult {
        trial,
        seed,
        steps,
        aborted,
        wall_time: start.elapsed(),
    }
}

/// Per-step averages over trials.
#[derive(Debug, Clone, PartialEq)]
pub struct StepSummary {
    pub k: u32,
    pub trials: u32,
    pub mean_ospa: f64,
    pub mean_ospa_loc: f64,
    pub mean_ospa_card: f64,
    pub mean_evaluations: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub trials: Vec<TrialResult>,
    pub summary: Vec<StepSummary>,
}

impl ExperimentReport {
    /// Mean of the per-trial time-averaged OSPA values.
    pub fn time_averaged_ospa(&self) -> f64 {
        self.trials.iter().map(TrialResult::time_averaged_ospa).sum::<f64>() / self.trials.len() as f64
    }

    pub fn aborted(&self) -> impl Iterator<Item = &TrialResult> {
        self.trials.iter().filter(|t| t.aborted.is_some())
    }
}

/// Averages step records across trials in trial order, so the result does
/// not depend on how trials were scheduled.
pub fn summarize(trials: &[TrialResult], duration: u32) -> Vec<StepSummary> {
    (1..=duration)
        .filter_map(|k| {
            let recs: Vec<&StepRecord> = trials.iter().filter_map(|t| t.steps.get(k as usize - 1)).collect();
            if recs.is_empty() {
                return None;
            }
            let n = recs.len() as f64;
            let mean = |f: &dyn Fn(&StepRecord) -> f64| recs.iter().map(|r| f(r)).sum::<f64>() / n;
            Some(StepSummary {
                k,
                trials: recs.len() as u32,
                mean_ospa: mean(&|r| r.ospa.total),
                mean_ospa_loc: mean(&|r| r.ospa.localization),
                mean_ospa_card: mean(&|r| r.ospa.cardinality),
                mean_evaluations: mean(&|r| r.evaluations as f64),
            })
        })
        .collect()
}

/// Runs `config.mc_trials` trials, optionally in parallel. Output is
/// identical either way.
pub fn run_experiment(config: &ScenarioConfig, parallel: bool) -> Result<ExperimentReport> {
    let models = config.build()?;
    let one = |trial: u32| {
        let seed = config.base_seed.wrapping_add(u64::from(trial));
        let truth = generate_truth(config, &mut stream(seed, TRUTH_STREAM));
        run_trial_with_truth(config, &models, &truth, trial, seed)
    };
    let trials: Vec<TrialResult> = if parallel {
        (0..config.mc_trials).into_par_iter().map(one).collect()
    } else {
        (0..config.mc_trials).map(one).collect()
    };
    let summary = summarize(&trials, config.duration);
    Ok(ExperimentReport { trials, summary })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::scenario_one;

    fn small() -> ScenarioConfig {
        let mut c = scenario_one();
        c.duration = 12;
        c.mc_trials = 2;
        c.birth.particles_per_track = 60;
        c.truth.retain(|t| t.birth <= 12);
        c
    }

    #[test]
    fn same_seed_same_trial() {
        let c = small();
        let (a, b) = (run_trial(&c, 1).unwrap(), run_trial(&c, 1).unwrap());
        assert_eq!(a.steps, b.steps);
        assert_eq!(a.seed, c.base_seed + 1);
    }

    #[test]
    fn single_trial_summary_equals_the_trial() {
        let mut c = small();
        c.mc_trials = 1;
        let report = run_experiment(&c, false).unwrap();
        let t = &report.trials[0];
        for (s, r) in report.summary.iter().zip(&t.steps) {
            assert_eq!(
                (s.trials, s.mean_ospa, s.mean_evaluations),
                (1, r.ospa.total, r.evaluations as f64)
            );
        }
        assert_eq!(report.time_averaged_ospa(), t.time_averaged_ospa());
    }

    #[test]
    fn summary_of_identical_trials_is_the_constant() {
        let c = small();
        let t = run_trial(&c, 0).unwrap();
        let mut other = t.clone();
        other.trial = 1;
        for (s, r) in summarize(&[t.clone(), other], c.duration).iter().zip(&t.steps) {
            assert_eq!((s.trials, s.mean_ospa), (2, r.ospa.total));
        }
    }

    #[test]
    fn only_selected_receivers_are_recorded() {
        let mut c = small();
        c.selection.strategy = Strategy::Greedy;
        let t = run_trial(&c, 0).unwrap();
        assert!(t.aborted.is_none());
        for s in &t.steps {
            assert_eq!(s.selected.len(), c.selection.sensors);
            assert_eq!(s.rewards.len(), s.selected.len());
            assert_eq!(s.evaluations, 19);
        }
    }
}
