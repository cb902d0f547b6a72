//! Ground-truth trajectories.

use passive_glmb::models::{Dynamics, MotionModel};
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;

use crate::config::ScenarioConfig;

/// One live target at one step.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthState {
    pub target: u32,
    pub state: Vec<f64>,
}

/// Truth per step; entry `k - 1` holds the targets alive at step `k`, in
/// target order. Targets are numbered from 1 in config order.
#[derive(Debug, Clone, PartialEq)]
pub struct Truth {
    pub steps: Vec<Vec<TruthState>>,
    motion: MotionModel,
}

impl Truth {
    pub fn at(&self, k: u32) -> &[TruthState] {
        &self.steps[k as usize - 1]
    }

    pub fn positions(&self, k: u32) -> Vec<[f64; 2]> {
        self.at(k).iter().map(|t| self.motion.position(&t.state)).collect()
    }
}

/// Propagates every scripted target with the scenario's process noise.
/// Constant-turn targets follow their turn schedule instead of a random
/// turn rate.
pub fn generate_truth(config: &ScenarioConfig, rng: &mut dyn RngCore) -> Truth {
    let duration = config.duration as usize;
    let mut steps: Vec<Vec<TruthState>> = vec![Vec::new(); duration];
    for (i, target) in config.truth.iter().enumerate() {
        let mut state = target.initial.clone();
        for k in target.birth..=config.duration {
            if !target.alive_at(k) {
                break;
            }
            if k > target.birth {
                state = match config.motion {
                    MotionModel::ConstantTurn(ct) => {
                        let ax: f64 = rng.sample(StandardNormal);
                        let ay: f64 = rng.sample(StandardNormal);
                        ct.transition(&state, [ct.sigma_w * ax, ct.sigma_w * ay], 0.0).to_vec()
                    }
                    MotionModel::ConstantVelocity(cv) => cv.transition(&state, cv.sample_noise(rng)).to_vec(),
                };
            }
            if let Some(rate) = target.turn_rate(k) {
                state[4] = rate;
            }
            steps[k as usize - 1].push(TruthState {
                target: i as u32 + 1,
                state: state.clone(),
            });
        }
    }
    Truth {
        steps,
        motion: config.motion,
    }
}
