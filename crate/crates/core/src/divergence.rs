//! Closed-form Cauchy-Schwarz divergence between two delta-GLMB densities.
//!
//! Particle track densities are replaced by moment-matched Gaussians, which
//! makes every single-target inner product exact:
//! `<N(a, A), N(b, B)> = N(a; b, A + B)`. The multi-target inner product
//! sums over component pairs that share an identical label set, with one
//! factor `K <p, p'>` per label.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::rfs::{GlmbDensity, Label, ParticleDensity};

/// Covariance regularization added by [`moment_match`].
pub const COVARIANCE_EPS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSummary {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

/// Unit of hyper-volume in state space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HypervolumeUnit(f64);

impl HypervolumeUnit {
    pub fn new(k: f64) -> Result<Self> {
        if !(k > 0.0) || !k.is_finite() {
            return Err(Error::InvalidModel(format!("hyper-volume unit {k} must be positive")));
        }
        Ok(Self(k))
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

impl Default for HypervolumeUnit {
    fn default() -> Self {
        Self(1.0)
    }
}

/// Weighted mean and covariance of a particle cloud, plus `eps * I`.
pub fn moment_match(p: &ParticleDensity) -> GaussianSummary {
    let m = raw_moments(p);
    let d = m.mean.len();
    let mut covariance = DMatrix::from_row_slice(d, d, &m.cov);
    for r in 0..d {
        covariance[(r, r)] += COVARIANCE_EPS;
    }
    GaussianSummary {
        mean: DVector::from_vec(m.mean),
        covariance,
    }
}

/// Weighted mean and full row-major covariance, unregularized.
fn raw_moments(p: &ParticleDensity) -> Moments {
    let d = p.dim();
    let mean = p.mean();
    let mut cov = vec![0.0; d * d];
    let mut dev = vec![0.0; d];
    for (x, w) in p.particles() {
        if w == 0.0 {
            continue;
        }
        for ((dv, xi), mi) in dev.iter_mut().zip(x).zip(&mean) {
            *dv = xi - mi;
        }
        for r in 0..d {
            let wr = w * dev[r];
            let row = &mut cov[r * d..(r + 1) * d];
            for c in r..d {
                row[c] += wr * dev[c];
            }
        }
    }
    for r in 0..d {
        for c in 0..r {
            cov[r * d + c] = cov[c * d + r];
        }
    }
    Moments { mean, cov }
}

#[derive(Debug, Clone)]
struct Moments {
    mean: Vec<f64>,
    cov: Vec<f64>,
}

impl Moments {
    /// `ln N(m_a; m_b, P_a + P_b + reg * I)` via an in-place Cholesky
    /// factorization.
    fn log_inner(&self, other: &Moments, reg: f64) -> Result<f64> {
        let d = self.mean.len();
        if other.mean.len() != d {
            return Err(Error::Dimension {
                expected: d,
                got: other.mean.len(),
            });
        }
        let mut l: Vec<f64> = self.cov.iter().zip(&other.cov).map(|(a, b)| a + b).collect();
        for i in 0..d {
            l[i * d + i] += reg;
        }
        let mut log_det = 0.0;
        for j in 0..d {
            let mut diag = l[j * d + j];
            for k in 0..j {
                diag -= l[j * d + k] * l[j * d + k];
            }
            if !(diag > 0.0) {
                return Err(Error::Degenerate("summed covariance is not positive definite".into()));
            }
            let ljj = diag.sqrt();
            l[j * d + j] = ljj;
            log_det += 2.0 * ljj.ln();
            for i in j + 1..d {
                let mut v = l[i * d + j];
                for k in 0..j {
                    v -= l[i * d + k] * l[j * d + k];
                }
                l[i * d + j] = v / ljj;
            }
        }
        // Forward substitution for y = L^-1 (m_a - m_b).
        let mut y = vec![0.0; d];
        let mut quad = 0.0;
        for i in 0..d {
            let mut v = self.mean[i] - other.mean[i];
            for k in 0..i {
                v -= l[i * d + k] * y[k];
            }
            y[i] = v / l[i * d + i];
            quad += y[i] * y[i];
        }
        Ok(-0.5 * (d as f64 * (2.0 * PI).ln() + log_det + quad))
    }
}

/// `ln N(m_a; m_b, P_a + P_b)`.
pub fn log_gaussian_inner_product(a: &GaussianSummary, b: &GaussianSummary) -> Result<f64> {
    let flat = |g: &GaussianSummary| Moments {
        mean: g.mean.iter().copied().collect(),
        cov: g.covariance.transpose().iter().copied().collect(),
    };
    flat(a).log_inner(&flat(b), 0.0)
}

pub fn gaussian_inner_product(a: &GaussianSummary, b: &GaussianSummary) -> Result<f64> {
    log_gaussian_inner_product(a, b).map(f64::exp)
}

/// Streaming log-sum-exp accumulator.
#[derive(Debug, Clone, Copy)]
struct LogSum {
    max: f64,
    sum: f64,
}

impl LogSum {
    fn new() -> Self {
        Self {
            max: f64::NEG_INFINITY,
            sum: 0.0,
        }
    }

    fn add(&mut self, x: f64) {
        if x == f64::NEG_INFINITY {
            return;
        }
        if x > self.max {
            self.sum = self.sum * (self.max - x).exp() + 1.0;
            self.max = x;
        } else {
            self.sum += (x - self.max).exp();
        }
    }

    fn value(&self) -> f64 {
        if self.sum > 0.0 {
            self.max + self.sum.ln()
        } else {
            f64::NEG_INFINITY
        }
    }
}

/// A GLMB density with Gaussian track summaries, grouped by label set.
/// Components with identical track tuples are merged. Summaries are stored
/// without regularization; `eps` is applied in units of `K^(1/d)` when
/// inner products are taken, so a joint change of coordinates and unit
/// leaves the divergence unchanged.
#[derive(Debug)]
pub struct GaussianGlmb {
    /// Label set -> (log of summed weight, index into `tracks` per label).
    groups: BTreeMap<Vec<Label>, Vec<(f64, Vec<usize>)>>,
    tracks: Vec<Moments>,
    self_product: OnceLock<(f64, f64)>,
}

impl GaussianGlmb {
    pub fn new(density: &GlmbDensity) -> Self {
        let mut index: HashMap<usize, usize> = HashMap::new();
        let mut tracks = Vec::new();
        let mut merged: BTreeMap<Vec<Label>, BTreeMap<Vec<usize>, f64>> = BTreeMap::new();
        for comp in density.components() {
            if comp.weight <= 0.0 {
                continue;
            }
            let ids: Vec<usize> = comp
                .tracks()
                .values()
                .map(|p| {
                    *index.entry(Arc::as_ptr(p) as usize).or_insert_with(|| {
                        tracks.push(raw_moments(p));
                        tracks.len() - 1
                    })
                })
                .collect();
            *merged.entry(comp.label_vec()).or_default().entry(ids).or_insert(0.0) += comp.weight;
        }
        let groups = merged
            .into_iter()
            .map(|(labels, m)| (labels, m.into_iter().map(|(ids, w)| (w.ln(), ids)).collect()))
            .collect();
        Self {
            groups,
            tracks,
            self_product: OnceLock::new(),
        }
    }

    pub fn track_count(&self) -> usize {
        self.tracks.len()
    }

    /// `ln <a, b>_K`. Pairwise track products are cached per call.
    fn log_inner(a: &Self, b: &Self, unit: HypervolumeUnit) -> Result<f64> {
        let ln_k = unit.value().ln();
        let nb = b.tracks.len();
        let mut cache = vec![f64::NAN; a.tracks.len() * nb];
        let mut total = LogSum::new();
        for (labels, ga) in &a.groups {
            let Some(gb) = b.groups.get(labels) else {
                continue;
            };
            let base = ln_k * labels.len() as f64;
            for (lwa, ia) in ga {
                for (lwb, ib) in gb {
                    let mut term = lwa + lwb + base;
                    for (&ta, &tb) in ia.iter().zip(ib) {
                        let slot = &mut cache[ta * nb + tb];
                        if slot.is_nan() {
                            let (ma, mb) = (&a.tracks[ta], &b.tracks[tb]);
                            let reg = 2.0 * COVARIANCE_EPS * unit.value().powf(2.0 / ma.mean.len() as f64);
                            *slot = ma.log_inner(mb, reg)?;
                        }
                        term += *slot;
                    }
                    total.add(term);
                }
            }
        }
        Ok(total.value())
    }

    fn log_self(&self, unit: HypervolumeUnit) -> Result<f64> {
        if let Some((k, v)) = self.self_product.get() {
            if *k == unit.value() {
                return Ok(*v);
            }
        }
        let v = Self::log_inner(self, self, unit)?;
        let _ = self.self_product.set((unit.value(), v));
        Ok(v)
    }
}

/// Cauchy-Schwarz divergence between two prepared densities.
pub fn cs_divergence_prepared(a: &GaussianGlmb, b: &GaussianGlmb, unit: HypervolumeUnit) -> Result<f64> {
    if std::ptr::eq(a, b) {
        return Ok(0.0);
    }
    let aa = a.log_self(unit)?;
    let bb = b.log_self(unit)?;
    if aa == f64::NEG_INFINITY || bb == f64::NEG_INFINITY {
        return Err(Error::Degenerate("zero self inner product".into()));
    }
    let ab = GaussianGlmb::log_inner(a, b, unit)?;
    if ab == f64::NEG_INFINITY {
        // Disjoint label-set support: the densities are orthogonal.
        return Ok(f64::INFINITY);
    }
    Ok((0.5 * (aa + bb) - ab).max(0.0))
}

/// `D_CS(a, b) = -ln( <a, b>_K / sqrt(<a, a>_K <b, b>_K) )`.
pub fn cs_divergence(a: &GlmbDensity, b: &GlmbDensity, unit: HypervolumeUnit) -> Result<f64> {
    if std::ptr::eq(a, b) {
        return Ok(0.0);
    }
    cs_divergence_prepared(&GaussianGlmb::new(a), &GaussianGlmb::new(b), unit)
}
