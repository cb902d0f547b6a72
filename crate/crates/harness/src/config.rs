//! Versioned scenario configuration.

use std::path::Path;

use passive_glmb::metrics::OspaParams;
use passive_glmb::models::{BirthModel, BirthTerm, CtModel, CvModel, MotionModel, SurvivalModel};
use passive_glmb::radar::{ClutterModel, DetectionModel, NoiseModel, RadarSensor, Receiver, StateLayout, Transmitter};
use passive_glmb::sensor::{FusionOrder, Strategy};
use passive_glmb::FilterParams;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BirthTermConfig {
    pub weight: f64,
    pub mean: Vec<f64>,
    /// Per-coordinate standard deviations of a diagonal covariance.
    pub std: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BirthConfig {
    pub particles_per_track: usize,
    pub terms: Vec<BirthTermConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub transmitter: [f64; 2],
    pub receivers: Vec<Receiver>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectionConfig {
    pub strategy: Strategy,
    /// Receivers activated per step.
    pub sensors: usize,
    pub fusion_order: FusionOrder,
}

/// Turn rate applied from step `from` onwards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TurnSegment {
    pub from: u32,
    pub rate: f64,
}

/// Scripted ground-truth target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthTarget {
    pub birth: u32,
    /// First step at which the target is gone; `None` keeps it to the end.
    #[serde(default)]
    pub death: Option<u32>,
    pub initial: Vec<f64>,
    /// Constant-turn scenarios only.
    #[serde(default)]
    pub turn_segments: Vec<TurnSegment>,
}

impl TruthTarget {
    pub fn alive_at(&self, k: u32) -> bool {
        k >= self.birth && self.death.is_none_or(|d| k < d)
    }

    /// Scheduled turn rate at step `k`, if any segment has started.
    pub fn turn_rate(&self, k: u32) -> Option<f64> {
        self.turn_segments
            .iter()
            .filter(|s| s.from <= k)
            .max_by_key(|s| s.from)
            .map(|s| s.rate)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub scenario: String,
    pub duration: u32,
    pub motion: MotionModel,
    pub survival: SurvivalModel,
    pub birth: BirthConfig,
    pub network: NetworkConfig,
    pub detection: DetectionModel,
    pub noise: NoiseModel,
    pub clutter: ClutterModel,
    pub filter: FilterParams,
    pub selection: SelectionConfig,
    pub ospa: OspaParams,
    pub truth: Vec<TruthTarget>,
    pub mc_trials: u32,
    pub base_seed: u64,
}

fn default_network() -> NetworkConfig {
    let mut receivers = Vec::new();
    for (row, y) in [5000.0, -5000.0].into_iter().enumerate() {
        for (col, x) in [0.0, 7500.0, 15_000.0, 22_500.0, 30_000.0].into_iter().enumerate() {
            receivers.push(Receiver {
                id: (row * 5 + col) as u32 + 1,
                position: [x, y],
            });
        }
    }
    NetworkConfig {
        transmitter: [0.0, 0.0],
        receivers,
    }
}

fn common(scenario: &str, motion: MotionModel, birth: BirthConfig, truth: Vec<TruthTarget>) -> ScenarioConfig {
    ScenarioConfig {
        schema_version: SCHEMA_VERSION,
        scenario: scenario.into(),
        duration: 50,
        motion,
        survival: SurvivalModel { p_s: 0.99 },
        birth,
        network: default_network(),
        detection: DetectionModel::default(),
        noise: NoiseModel::default(),
        clutter: ClutterModel::default(),
        filter: FilterParams::default(),
        selection: SelectionConfig {
            strategy: Strategy::Greedy,
            sensors: 2,
            fusion_order: FusionOrder::DualStage,
        },
        ospa: OspaParams::default(),
        truth,
        mc_trials: 50,
        base_seed: 0,
    }
}

/// Three constant-turn targets born at steps 1, 10 and 20.
pub fn scenario_one() -> ScenarioConfig {
    let deg = std::f64::consts::PI / 180.0;
    let terms = [
        [9500.0, 0.0, -4000.0, 0.0, 0.0],
        [9000.0, 0.0, 1000.0, 0.0, 0.0],
        [9000.0, 0.0, -2500.0, 0.0, 0.0],
    ]
    .into_iter()
    .map(|m| BirthTermConfig {
        weight: 0.02,
        mean: m.to_vec(),
        std: vec![100.0, 10.0, 100.0, 10.0, deg],
    })
    .collect();
    let seg = |from, rate| TurnSegment { from, rate };
    let truth = vec![
        TruthTarget {
            birth: 1,
            death: None,
            initial: vec![9500.0, 8.0, -4000.0, 6.0, 0.0],
            turn_segments: vec![seg(1, 0.0), seg(20, 0.02), seg(28, 0.0)],
        },
        TruthTarget {
            birth: 10,
            death: None,
            initial: vec![9000.0, 10.0, 1000.0, -4.0, 0.0],
            turn_segments: vec![seg(10, 0.0), seg(25, -0.02), seg(32, 0.0)],
        },
        TruthTarget {
            birth: 20,
            death: None,
            initial: vec![9000.0, -6.0, -2500.0, -8.0, 0.0],
            turn_segments: vec![seg(20, 0.0), seg(35, 0.02), seg(40, 0.0)],
        },
    ];
    common(
        "scenario-1",
        MotionModel::ConstantTurn(CtModel {
            dt: 10.0,
            sigma_w: 0.01,
            sigma_turn: 1e-4,
        }),
        BirthConfig {
            particles_per_track: 3000,
            terms,
        },
        truth,
    )
}

/// Six constant-velocity targets born at steps 1, 10, 15, 15, 20 and 20.
/// States are `[x, y, vx, vy]`.
pub fn scenario_two() -> ScenarioConfig {
    let terms = [
        [15_000.0, -1500.0, 0.0, 0.0],
        [12_000.0, 5000.0, 0.0, 0.0],
        [15_000.0, -2500.0, 0.0, 0.0],
    ]
    .into_iter()
    .map(|m| BirthTermConfig {
        weight: 0.02,
        mean: m.to_vec(),
        std: vec![100.0, 100.0, 10.0, 10.0],
    })
    .collect();
    let target = |birth, initial: [f64; 4]| TruthTarget {
        birth,
        death: None,
        initial: initial.to_vec(),
        turn_segments: vec![],
    };
    let truth = vec![
        target(1, [15_000.0, -1500.0, -8.0, 5.0]),
        target(10, [12_000.0, 5000.0, 6.0, -7.0]),
        target(20, [15_000.0, -1500.0, 7.0, 6.0]),
        target(15, [15_000.0, -2500.0, -6.0, -6.0]),
        target(15, [12_000.0, 5000.0, -9.0, -3.0]),
        target(20, [12_000.0, 5000.0, 8.0, 2.0]),
    ];
    common(
        "scenario-2",
        MotionModel::ConstantVelocity(CvModel {
            dt: 10.0,
            sigma_u: 0.01,
        }),
        BirthConfig {
            particles_per_track: 3000,
            terms,
        },
        truth,
    )
}

/// Fully built models for one run.
#[derive(Debug, Clone)]
pub struct Models {
    pub motion: MotionModel,
    pub survival: SurvivalModel,
    pub birth: BirthModel,
    pub sensors: Vec<RadarSensor>,
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        let config: Self =
            serde_json::from_str(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn state_layout(&self) -> StateLayout {
        match self.motion {
            MotionModel::ConstantTurn(_) => StateLayout { x: 0, y: 2 },
            MotionModel::ConstantVelocity(_) => StateLayout { x: 0, y: 1 },
        }
    }

    pub fn state_dim(&self) -> usize {
        match self.motion {
            MotionModel::ConstantTurn(_) => 5,
            MotionModel::ConstantVelocity(_) => 4,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.build().map(|_| ())
    }

    pub fn build(&self) -> Result<Models> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!(
                "schema_version {} is not {SCHEMA_VERSION}",
                self.schema_version
            ));
        }
        if self.duration < 1 {
            return bad("duration must be at least 1".into());
        }
        if self.mc_trials < 1 {
            return bad("mc_trials must be at least 1".into());
        }
        let motion = match self.motion {
            MotionModel::ConstantTurn(m) => MotionModel::ConstantTurn(CtModel::new(m.dt, m.sigma_w, m.sigma_turn)?),
            MotionModel::ConstantVelocity(m) => MotionModel::ConstantVelocity(CvModel::new(m.dt, m.sigma_u)?),
        };
        let survival = SurvivalModel::new(self.survival.p_s)?;
        let dim = self.state_dim();
        let mut terms = Vec::new();
        for (i, t) in self.birth.terms.iter().enumerate() {
            if t.mean.len() != dim || t.std.len() != dim {
                return bad(format!("birth term {} must have {dim} coordinates", i + 1));
            }
            terms.push(BirthTerm::with_std(t.weight, t.mean.clone(), &t.std)?);
        }
        let birth = BirthModel::new(terms, self.birth.particles_per_track)?;
        self.detection.validate()?;
        self.noise.validate()?;
        self.clutter.validate()?;
        self.filter.validate()?;
        if !(self.ospa.p >= 1.0 && self.ospa.c > 0.0) {
            return bad("ospa needs p >= 1 and c > 0".into());
        }

        let mut ids: Vec<u32> = self.network.receivers.iter().map(|r| r.id).collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != self.network.receivers.len() {
            return bad("receiver ids must be unique".into());
        }
        let n = self.network.receivers.len();
        let p = self.selection.sensors;
        if p == 0 || p > n {
            return bad(format!("cannot select {p} of {n} receivers"));
        }

        for (i, t) in self.truth.iter().enumerate() {
            let name = format!("truth target {}", i + 1);
            if t.initial.len() != dim {
                return bad(format!("{name} must have {dim} coordinates"));
            }
            if t.birth < 1 || t.birth > self.duration {
                return bad(format!("{name} is born outside 1..={}", self.duration));
            }
            if let Some(d) = t.death {
                if d <= t.birth || d > self.duration {
                    return bad(format!("{name} needs birth < death <= duration"));
                }
            }
            if !t.turn_segments.is_empty() && dim != 5 {
                return bad(format!(
                    "{name} has turn segments but the motion model has no turn rate"
                ));
            }
        }

        let layout = self.state_layout();
        let transmitter = Transmitter {
            position: self.network.transmitter,
        };
        let sensors = self
            .network
            .receivers
            .iter()
            .map(|&receiver| RadarSensor {
                receiver,
                transmitter,
                detection: self.detection,
                noise: self.noise,
                clutter: self.clutter,
                layout,
            })
            .collect();
        Ok(Models {
            motion,
            survival,
            birth,
            sensors,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        for c in [scenario_one(), scenario_two()] {
            c.validate().unwrap();
            let back: ScenarioConfig = serde_json::from_str(&c.to_json()).unwrap();
            assert_eq!(back, c);
        }
    }

    #[test]
    fn default_network_layout() {
        let n = default_network();
        assert_eq!(n.receivers.len(), 10);
        assert_eq!(n.receivers[0].position, [0.0, 5000.0]);
        assert_eq!(n.receivers[9].position, [30_000.0, -5000.0]);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut c = scenario_one();
        c.selection.sensors = 11;
        assert!(matches!(c.validate(), Err(HarnessError::Config(_))));
        let mut c = scenario_one();
        c.schema_version = 99;
        assert!(c.validate().is_err());
        let mut c = scenario_one();
        c.truth[0].death = Some(1);
        assert!(c.validate().is_err());
        let mut c = scenario_two();
        c.birth.terms[0].std[0] = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn turn_schedule_lookup() {
        let t = &scenario_one().truth[0];
        assert_eq!(t.turn_rate(5), Some(0.0));
        assert_eq!(t.turn_rate(20), Some(0.02));
        assert_eq!(t.turn_rate(27), Some(0.02));
        assert_eq!(t.turn_rate(28), Some(0.0));
        assert!(!t.alive_at(0) && t.alive_at(1));
    }
}
