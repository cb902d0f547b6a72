//! Sequential Monte Carlo delta-GLMB tracking for passive bistatic radar
//! networks, with divergence-based receiver selection and ordered fusion.

pub mod assignment;
pub mod divergence;
pub mod error;
pub mod filter;
pub mod metrics;
pub mod models;
pub mod oracle;
pub mod radar;
pub mod rfs;
pub mod sensor;

pub use error::{Error, Result};
pub use filter::{predict, update, FilterOutput, FilterParams, MeasurementModel};
pub use nalgebra;
pub use rfs::{GlmbComponent, GlmbDensity, Label, LabeledEstimate, ParticleDensity};
