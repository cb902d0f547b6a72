//! Passive bistatic radar: bearing / bistatic-range measurements,
//! range-dependent detection and uniform Poisson clutter.

use std::collections::BTreeMap;
use std::f64::consts::{PI, SQRT_2};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::MeasurementModel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Receiver {
    pub id: u32,
    pub position: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transmitter {
    pub position: [f64; 2],
}

/// `p_D(d) = 1 - Phi((d - alpha) / sqrt(beta))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionModel {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for DetectionModel {
    fn default() -> Self {
        Self {
            alpha: 15_000.0,
            beta: 4000.0 * 4000.0,
        }
    }
}

impl DetectionModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0) || !self.alpha.is_finite() {
            return Err(Error::InvalidModel("detection model needs beta > 0".into()));
        }
        Ok(())
    }

    /// Detection probability at receiver-target distance `d` (m).
    pub fn at_distance(&self, d: f64) -> f64 {
        // 1 - Phi(u) = erfc(u / sqrt 2) / 2
        0.5 * libm::erfc((d - self.alpha) / (self.beta.sqrt() * SQRT_2))
    }
}

/// Distance-dependent measurement noise scales.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub rho0: f64,
    pub eta_rho: f64,
    pub phi0: f64,
    pub eta_phi: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            rho0: 1.0,
            eta_rho: 5e-5,
            phi0: PI / 180.0,
            eta_phi: 1e-5,
        }
    }
}

impl NoiseModel {
    pub fn zero() -> Self {
        Self {
            rho0: 0.0,
            eta_rho: 0.0,
            phi0: 0.0,
            eta_phi: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if [self.rho0, self.eta_rho, self.phi0, self.eta_phi]
            .iter()
            .any(|v| !(*v >= 0.0))
        {
            return Err(Error::InvalidModel("noise parameters must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn bearing_std(&self, d: f64) -> f64 {
        self.phi0 + self.eta_phi * d
    }

    pub fn range_std(&self, d: f64) -> f64 {
        self.rho0 + self.eta_rho * d * d
    }
}

/// Uniform clutter over `bearing in [-pi, pi] x range in [0, max_range]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClutterModel {
    pub max_range: f64,
    /// Intensity per (rad * m).
    pub intensity: f64,
}

impl Default for ClutterModel {
    fn default() -> Self {
        Self {
            max_range: 15_000.0,
            intensity: 2e-5,
        }
    }
}

impl ClutterModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.intensity >= 0.0) || !(self.max_range > 0.0) {
            return Err(Error::InvalidModel(
                "clutter needs intensity >= 0 and max_range > 0".into(),
            ));
        }
        Ok(())
    }

    pub fn region_volume(&self) -> f64 {
        2.0 * PI * self.max_range
    }

    /// Poisson mean of the clutter count per scan.
    pub fn mean_count(&self) -> f64 {
        self.intensity * self.region_volume()
    }

    pub fn contains(&self, z: &Measurement) -> bool {
        (-PI..=PI).contains(&z.bearing) && (0.0..=self.max_range).contains(&z.range)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    /// Bearing from the receiver, rad in `[-pi, pi]`.
    pub bearing: f64,
    /// Transmitter-target plus target-receiver distance, m.
    pub range: f64,
}

/// Per-step message from the activated receivers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementMessage {
    pub time: u32,
    pub sets: BTreeMap<u32, Vec<Measurement>>,
}

impl MeasurementMessage {
    pub fn new(time: u32) -> Self {
        Self {
            time,
            sets: BTreeMap::new(),
        }
    }

    /// Activated receiver ids; equal to the key set of `sets`.
    pub fn activated(&self) -> Vec<u32> {
        self.sets.keys().copied().collect()
    }
}

/// Wraps an angle into `[-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    if a > -PI && a <= PI {
        return a;
    }
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w == -PI && a > 0.0 {
        PI
    } else {
        w
    }
}

fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

pub fn detection_probability(target: [f64; 2], receiver: &Receiver, model: &DetectionModel) -> f64 {
    model.at_distance(distance(target, receiver.position))
}

/// Noise-free bearing and bistatic range.
pub fn ideal_measurement(target: [f64; 2], receiver: &Receiver, transmitter: &Transmitter) -> Result<Measurement> {
    let dx = target[0] - receiver.position[0];
    let dy = target[1] - receiver.position[1];
    if dx == 0.0 && dy == 0.0 {
        return Err(Error::UndefinedBearing { receiver: receiver.id });
    }
    Ok(Measurement {
        bearing: dy.atan2(dx),
        range: distance(target, transmitter.position) + dx.hypot(dy),
    })
}

pub fn noisy_measurement<R: Rng + ?Sized>(
    target: [f64; 2],
    receiver: &Receiver,
    transmitter: &Transmitter,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<Measurement> {
    let z = ideal_measurement(target, receiver, transmitter)?;
    let d = distance(target, receiver.position);
    let e_phi: f64 = rng.sample(rand_distr::StandardNormal);
    let e_rho: f64 = rng.sample(rand_distr::StandardNormal);
    Ok(Measurement {
        bearing: wrap_angle(z.bearing + noise.bearing_std(d) * e_phi),
        range: z.range + noise.range_std(d) * e_rho,
    })
}

fn gaussian_pdf(residual: f64, sigma: f64) -> f64 {
    let u = residual / sigma;
    (-0.5 * u * u).exp() / (sigma * (2.0 * PI).sqrt())
}

/// `g(z | target)` as the product of the bearing (circular residual) and
/// range Gaussian densities.
pub fn likelihood(
    z: &Measurement,
    target: [f64; 2],
    receiver: &Receiver,
    transmitter: &Transmitter,
    noise: &NoiseModel,
) -> f64 {
    let Ok(ideal) = ideal_measurement(target, receiver, transmitter) else {
        return 0.0;
    };
    let d = distance(target, receiver.position);
    gaussian_pdf(wrap_angle(z.bearing - ideal.bearing), noise.bearing_std(d))
        * gaussian_pdf(z.range - ideal.range, noise.range_std(d))
}

pub fn clutter_intensity(z: &Measurement, model: &ClutterModel) -> f64 {
    if model.contains(z) {
        model.intensity
    } else {
        0.0
    }
}

/// Samples one scan: each target detected with its `p_D`, Poisson clutter
/// uniform over the region, returned in shuffled order.
pub fn generate_measurement_set<R: Rng + ?Sized>(
    truth: &[[f64; 2]],
    sensor: &RadarSensor,
    rng: &mut R,
) -> Result<Vec<Measurement>> {
    let mut out = Vec::new();
    for &p in truth {
        if rng.random::<f64>() < detection_probability(p, &sensor.receiver, &sensor.detection) {
            out.push(noisy_measurement(
                p,
                &sensor.receiver,
                &sensor.transmitter,
                &sensor.noise,
                rng,
            )?);
        }
    }
    let mean = sensor.clutter.mean_count();
    if mean > 0.0 {
        let count = Poisson::new(mean)
            .map_err(|e| Error::InvalidModel(format!("clutter rate: {e}")))?
            .sample(rng) as usize;
        for _ in 0..count {
            out.push(Measurement {
                bearing: rng.random_range(-PI..PI),
                range: rng.random_range(0.0..sensor.clutter.max_range),
            });
        }
    }
    out.shuffle(rng);
    Ok(out)
}

/// Indices of the planar position inside a state vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateLayout {
    pub x: usize,
    pub y: usize,
}

impl StateLayout {
    pub fn position(&self, state: &[f64]) -> [f64; 2] {
        [state[self.x], state[self.y]]
    }
}

/// One receiver with everything needed to simulate it and to score
/// particles against its measurements.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadarSensor {
    pub receiver: Receiver,
    pub transmitter: Transmitter,
    pub detection: DetectionModel,
    pub noise: NoiseModel,
    pub clutter: ClutterModel,
    pub layout: StateLayout,
}

impl RadarSensor {
    pub fn id(&self) -> u32 {
        self.receiver.id
    }
}

/// Per-particle quantities reused across all measurements of a scan.
#[derive(Debug, Clone, Copy)]
pub struct PredictedRadar {
    ideal: Option<Measurement>,
    p_d: f64,
    sigma_bearing: f64,
    sigma_range: f64,
}

impl MeasurementModel for RadarSensor {
    type Measurement = Measurement;
    type Predicted = PredictedRadar;

    fn predict(&self, state: &[f64]) -> PredictedRadar {
        let p = self.layout.position(state);
        let d = distance(p, self.receiver.position);
        PredictedRadar {
            ideal: ideal_measurement(p, &self.receiver, &self.transmitter).ok(),
            p_d: self.detection.at_distance(d),
            sigma_bearing: self.noise.bearing_std(d),
            sigma_range: self.noise.range_std(d),
        }
    }

    fn detection_probability(&self, pred: &PredictedRadar) -> f64 {
        pred.p_d
    }

    fn likelihood(&self, z: &Measurement, pred: &PredictedRadar) -> f64 {
        match pred.ideal {
            Some(ideal) => {
                gaussian_pdf(wrap_angle(z.bearing - ideal.bearing), pred.sigma_bearing)
                    * gaussian_pdf(z.range - ideal.range, pred.sigma_range)
            }
            None => 0.0,
        }
    }

    /// The filter assumes clutter intensity `lambda_c` everywhere. Clutter is
    /// only generated inside the region, but a zero intensity outside it
    /// would force every out-of-region measurement onto a track regardless
    /// of `p_D`.
    fn clutter_intensity(&self, _z: &Measurement) -> f64 {
        self.clutter.intensity
    }
}
