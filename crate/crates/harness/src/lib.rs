//! Scenario configuration, ground truth, Monte Carlo experiments and result
//! files for the passive bistatic radar tracker.

pub mod config;
pub mod error;
pub mod experiment;
pub mod output;
pub mod truth;

pub use config::{scenario_one, scenario_two, ScenarioConfig};
pub use error::{HarnessError, Result};
pub use experiment::{run_experiment, run_trial, ExperimentReport, TrialResult};
