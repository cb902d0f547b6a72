//! Target motion, survival and birth models.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rfs::{Label, ParticleDensity};

/// Below this turn rate (rad/s) the constant-turn matrix uses its
/// constant-velocity limit.
pub const TURN_RATE_EPS: f64 = 1e-6;

/// Single-target transition model used by the particle filter.
pub trait Dynamics: Sync {
    fn dim(&self) -> usize;

    /// Planar position `(x, y)` of a state.
    fn position(&self, state: &[f64]) -> [f64; 2];

    /// Draws `out ~ f(. | state)`.
    fn sample_transition(&self, state: &[f64], out: &mut [f64], rng: &mut dyn RngCore);
}

/// Nearly-constant-turn model on `[x, vx, y, vy, omega]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CtModel {
    pub dt: f64,
    /// Acceleration noise std (m/s^2) applied through the noise-gain matrix.
    pub sigma_w: f64,
    /// Turn-rate noise std (rad/s^2).
    pub sigma_turn: f64,
}

impl CtModel {
    pub fn new(dt: f64, sigma_w: f64, sigma_turn: f64) -> Result<Self> {
        if !(dt > 0.0) || !(sigma_w >= 0.0) || !(sigma_turn >= 0.0) {
            return Err(Error::InvalidModel(format!(
                "constant-turn model needs dt > 0 and nonnegative noise (dt={dt}, sigma_w={sigma_w}, sigma_turn={sigma_turn})"
            )));
        }
        Ok(Self {
            dt,
            sigma_w,
            sigma_turn,
        })
    }

    /// `F(omega)` acting on `[x, vx, y, vy]`.
    pub fn transition_matrix(&self, omega: f64) -> [[f64; 4]; 4] {
        let t = self.dt;
        let (s, c) = (omega * t).sin_cos();
        // sin(wT)/w and (1 - cos wT)/w, with their w -> 0 limits.
        let (a, b) = if omega.abs() < TURN_RATE_EPS {
            (t, 0.0)
        } else {
            let half = (0.5 * omega * t).sin();
            (s / omega, 2.0 * half * half / omega)
        };
        [[1.0, a, 0.0, -b], [0.0, c, 0.0, -s], [0.0, b, 1.0, a], [0.0, s, 0.0, c]]
    }

    /// Deterministic transition given acceleration noise `accel` (m/s^2)
    /// and turn-rate noise `turn_noise` (rad/s^2).
    pub fn transition(&self, state: &[f64], accel: [f64; 2], turn_noise: f64) -> [f64; 5] {
        let omega = state[4];
        let f = self.transition_matrix(omega);
        let t = self.dt;
        let g = [
            0.5 * t * t * accel[0],
            t * accel[0],
            0.5 * t * t * accel[1],
            t * accel[1],
        ];
        let mut out = [0.0; 5];
        for (i, row) in f.iter().enumerate() {
            out[i] = row[0] * state[0] + row[1] * state[1] + row[2] * state[2] + row[3] * state[3] + g[i];
        }
        out[4] = omega + t * turn_noise;
        out
    }
}

impl Dynamics for CtModel {
    fn dim(&self) -> usize {
        5
    }

    fn position(&self, state: &[f64]) -> [f64; 2] {
        [state[0], state[2]]
    }

    fn sample_transition(&self, state: &[f64], out: &mut [f64], rng: &mut dyn RngCore) {
        let ax: f64 = rng.sample(StandardNormal);
        let ay: f64 = rng.sample(StandardNormal);
        let nw: f64 = rng.sample(StandardNormal);
        let next = self.transition(state, [self.sigma_w * ax, self.sigma_w * ay], self.sigma_turn * nw);
        out.copy_from_slice(&next);
    }
}

/// Nearly-constant-velocity model on `[x, y, vx, vy]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvModel {
    pub dt: f64,
    pub sigma_u: f64,
}

impl CvModel {
    pub fn new(dt: f64, sigma_u: f64) -> Result<Self> {
        if !(dt > 0.0) || !(sigma_u >= 0.0) {
            return Err(Error::InvalidModel(format!(
                "constant-velocity model needs dt > 0 and sigma_u >= 0 (dt={dt}, sigma_u={sigma_u})"
            )));
        }
        Ok(Self { dt, sigma_u })
    }

    pub fn transition(&self, state: &[f64], noise: [f64; 4]) -> [f64; 4] {
        let t = self.dt;
        [
            state[0] + t * state[2] + noise[0],
            state[1] + t * state[3] + noise[1],
            state[2] + noise[2],
            state[3] + noise[3],
        ]
    }

    /// Process-noise covariance `Q`.
    pub fn process_covariance(&self) -> [[f64; 4]; 4] {
        let t = self.dt;
        let q = self.sigma_u * self.sigma_u;
        let (a, b, c) = (q * t.powi(3) / 3.0, q * t * t / 2.0, q * t);
        [[a, 0.0, b, 0.0], [0.0, a, 0.0, b], [b, 0.0, c, 0.0], [0.0, b, 0.0, c]]
    }

    /// Draws a noise vector with covariance `Q` from two standard normals per
    /// axis using the closed-form Cholesky factor of the 2x2 block.
    pub fn sample_noise(&self, rng: &mut dyn RngCore) -> [f64; 4] {
        let t = self.dt;
        let l00 = (t.powi(3) / 3.0).sqrt();
        let l10 = 0.5 * t * t / l00;
        let l11 = (t - l10 * l10).max(0.0).sqrt();
        let s = self.sigma_u;
        let mut axis = || {
            let n1: f64 = rng.sample(StandardNormal);
            let n2: f64 = rng.sample(StandardNormal);
            (s * l00 * n1, s * (l10 * n1 + l11 * n2))
        };
        let (px, vx) = axis();
        let (py, vy) = axis();
        [px, py, vx, vy]
    }
}

impl Dynamics for CvModel {
    fn dim(&self) -> usize {
        4
    }

    fn position(&self, state: &[f64]) -> [f64; 2] {
        [state[0], state[1]]
    }

    fn sample_transition(&self, state: &[f64], out: &mut [f64], rng: &mut dyn RngCore) {
        let noise = self.sample_noise(rng);
        out.copy_from_slice(&self.transition(state, noise));
    }
}

/// Scenario motion model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MotionModel {
    ConstantTurn(CtModel),
    ConstantVelocity(CvModel),
}

impl Dynamics for MotionModel {
    fn dim(&self) -> usize {
        match self {
            MotionModel::ConstantTurn(m) => m.dim(),
            MotionModel::ConstantVelocity(m) => m.dim(),
        }
    }

    fn position(&self, state: &[f64]) -> [f64; 2] {
        match self {
            MotionModel::ConstantTurn(m) => m.position(state),
            MotionModel::ConstantVelocity(m) => m.position(state),
        }
    }

    fn sample_transition(&self, state: &[f64], out: &mut [f64], rng: &mut dyn RngCore) {
        match self {
            MotionModel::ConstantTurn(m) => m.sample_transition(state, out, rng),
            MotionModel::ConstantVelocity(m) => m.sample_transition(state, out, rng),
        }
    }
}

/// Constant survival probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurvivalModel {
    pub p_s: f64,
}

impl SurvivalModel {
    pub fn new(p_s: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p_s) {
            return Err(Error::InvalidModel(format!(
                "survival probability {p_s} outside [0, 1]"
            )));
        }
        Ok(Self { p_s })
    }
}

/// One labeled Bernoulli birth term with Gaussian spatial density.
#[derive(Debug, Clone)]
pub struct BirthTerm {
    pub weight: f64,
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
    factor: DMatrix<f64>,
}

impl BirthTerm {
    pub fn new(weight: f64, mean: Vec<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        if !(weight > 0.0 && weight < 1.0) {
            return Err(Error::InvalidModel(format!("birth weight {weight} outside (0, 1)")));
        }
        let n = mean.len();
        if covariance.nrows() != n || covariance.ncols() != n {
            return Err(Error::Dimension {
                expected: n,
                got: covariance.nrows(),
            });
        }
        if (&covariance - covariance.transpose()).amax() > 1e-9 * covariance.amax().max(1.0) {
            return Err(Error::InvalidModel("birth covariance is not symmetric".into()));
        }
        let factor = covariance
            .clone()
            .cholesky()
            .ok_or_else(|| Error::InvalidModel("birth covariance is not positive definite".into()))?
            .l();
        Ok(Self {
            weight,
            mean: DVector::from_vec(mean),
            covariance,
            factor,
        })
    }

    /// Diagonal-covariance term from per-coordinate standard deviations.
    pub fn with_std(weight: f64, mean: Vec<f64>, std: &[f64]) -> Result<Self> {
        let cov = DMatrix::from_diagonal(&DVector::from_iterator(std.len(), std.iter().map(|s| s * s)));
        Self::new(weight, mean, cov)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Labeled multi-Bernoulli birth model.
#[derive(Debug, Clone)]
pub struct BirthModel {
    pub terms: Vec<BirthTerm>,
    pub particles_per_track: usize,
}

impl BirthModel {
    pub fn new(terms: Vec<BirthTerm>, particles_per_track: usize) -> Result<Self> {
        if particles_per_track == 0 {
            return Err(Error::InvalidModel("particles_per_track must be positive".into()));
        }
        if let Some(first) = terms.first() {
            if let Some(bad) = terms.iter().find(|t| t.dim() != first.dim()) {
                return Err(Error::Dimension {
                    expected: first.dim(),
                    got: bad.dim(),
                });
            }
        }
        Ok(Self {
            terms,
            particles_per_track,
        })
    }

    /// Draws one particle cloud per birth term, labeled `(time, i)` with
    /// `i` counted from 1.
    pub fn sample_birth<R: Rng + ?Sized>(&self, time: u32, rng: &mut R) -> Vec<(Label, ParticleDensity, f64)> {
        let n = self.particles_per_track;
        self.terms
            .iter()
            .enumerate()
            .map(|(i, term)| {
                let d = term.dim();
                let mut states = Vec::with_capacity(n * d);
                let mut z = DVector::<f64>::zeros(d);
                for _ in 0..n {
                    for zi in z.iter_mut() {
                        *zi = rng.sample(StandardNormal);
                    }
                    let x = &term.mean + &term.factor * &z;
                    states.extend(x.iter());
                }
                let density = ParticleDensity::uniform(d, states).expect("birth cloud is non-empty");
                (Label::new(time, i as u32 + 1), density, term.weight)
            })
            .collect()
    }
}
