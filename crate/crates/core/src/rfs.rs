//! Labeled random-finite-set data model.
//!
//! A [`GlmbDensity`] is a weighted mixture of labeled multi-target
//! exponentials in delta-GLMB form: every component carries a distinct label
//! set, an opaque history tag and one weighted-particle density per label.
//! Track densities are reference counted so that the many components which
//! share a track after prediction or update do not copy particle clouds.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Track label: the time step a track was born and its ordinal within that
/// step's birth model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Label {
    pub birth_time: u32,
    pub birth_index: u32,
}

impl Label {
    pub const fn new(birth_time: u32, birth_index: u32) -> Self {
        Self {
            birth_time,
            birth_index,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.birth_time, self.birth_index)
    }
}

/// Weighted-particle single-target density.
///
/// States are stored row-major (`len * dim` values) behind an `Arc` so that a
/// reweighted child density shares its parent's particle positions.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleDensity {
    dim: usize,
    states: Arc<Vec<f64>>,
    weights: Vec<f64>,
}

impl ParticleDensity {
    /// Builds a density and normalizes its weights.
    pub fn new(dim: usize, states: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        Self::from_shared(dim, Arc::new(states), weights)
    }

    /// Equal-weight density over the given row-major states.
    pub fn uniform(dim: usize, states: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidModel("zero state dimension".into()));
        }
        let n = states.len() / dim;
        Self::new(dim, states, vec![1.0; n])
    }

    /// Single particle located at `state`.
    pub fn point(state: &[f64]) -> Self {
        Self {
            dim: state.len(),
            states: Arc::new(state.to_vec()),
            weights: vec![1.0],
        }
    }

    fn from_shared(dim: usize, states: Arc<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidModel("zero state dimension".into()));
        }
        if weights.is_empty() {
            return Err(Error::Degenerate("particle density with no particles".into()));
        }
        if states.len() != weights.len() * dim {
            return Err(Error::Dimension {
                expected: weights.len() * dim,
                got: states.len(),
            });
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Degenerate("negative or non-finite particle weight".into()));
        }
        let mut density = Self { dim, states, weights };
        density.normalize()?;
        Ok(density)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    /// Iterator over `(state, weight)` pairs.
    pub fn particles(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.states.chunks_exact(self.dim).zip(self.weights.iter().copied())
    }

    /// Scales weights to sum to one.
    pub fn normalize(&mut self) -> Result<()> {
        let total: f64 = self.weights.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::Degenerate("particle weights sum to zero".into()));
        }
        for w in &mut self.weights {
            *w /= total;
        }
        Ok(())
    }

    /// Weighted particle mean.
    pub fn mean(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.dim];
        for (x, w) in self.particles() {
            for (m, xi) in mean.iter_mut().zip(x) {
                *m += w * xi;
            }
        }
        mean
    }

    /// Kish effective sample size of the (normalized) weights.
    pub fn effective_sample_size(&self) -> f64 {
        let sq: f64 = self.weights.iter().map(|w| w * w).sum();
        if sq > 0.0 {
            1.0 / sq
        } else {
            0.0
        }
    }

    /// Child density sharing these particle states with new weights
    /// (normalized on construction).
    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self> {
        Self::from_shared(self.dim, Arc::clone(&self.states), weights)
    }

    /// Systematic resampling to the same particle count.
    pub fn resample_systematic<R: Rng + ?Sized>(&self, rng: &mut R) -> Self {
        let n = self.len();
        let step = 1.0 / n as f64;
        let mut u = rng.random::<f64>() * step;
        let mut states = Vec::with_capacity(self.states.len());
        let mut cumulative = self.weights[0];
        let mut i = 0;
        for _ in 0..n {
            while u > cumulative && i + 1 < n {
                i += 1;
                cumulative += self.weights[i];
            }
            states.extend_from_slice(self.state(i));
            u += step;
        }
        Self {
            dim: self.dim,
            states: Arc::new(states),
            weights: vec![step; n],
        }
    }

    /// Pushes every particle through `f(old, new)`; weights are kept.
    pub fn propagate<F>(&self, out_dim: usize, mut f: F) -> Self
    where
        F: FnMut(&[f64], &mut [f64]),
    {
        let mut states = vec![0.0; self.len() * out_dim];
        for (x, out) in self.states.chunks_exact(self.dim).zip(states.chunks_exact_mut(out_dim)) {
            f(x, out);
        }
        Self {
            dim: out_dim,
            states: Arc::new(states),
            weights: self.weights.clone(),
        }
    }
}

/// One delta-GLMB component: label set, history tag, weight and per-label
/// track densities. The label set is the key set of the track map, which
/// keeps the two equal by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct GlmbComponent {
    pub history: u64,
    pub weight: f64,
    tracks: BTreeMap<Label, Arc<ParticleDensity>>,
}

impl GlmbComponent {
    pub fn new(history: u64, weight: f64, tracks: BTreeMap<Label, Arc<ParticleDensity>>) -> Self {
        Self {
            history,
            weight,
            tracks,
        }
    }

    /// The empty-label-set component.
    pub fn empty(history: u64, weight: f64) -> Self {
        Self::new(history, weight, BTreeMap::new())
    }

    pub fn labels(&self) -> impl Iterator<Item = Label> + '_ {
        self.tracks.keys().copied()
    }

    pub fn label_vec(&self) -> Vec<Label> {
        self.tracks.keys().copied().collect()
    }

    pub fn cardinality(&self) -> usize {
        self.tracks.len()
    }

    pub fn tracks(&self) -> &BTreeMap<Label, Arc<ParticleDensity>> {
        &self.tracks
    }

    pub fn track(&self, label: &Label) -> Option<&Arc<ParticleDensity>> {
        self.tracks.get(label)
    }
}

/// Total order used for truncation and MAP selection: weight descending,
/// then lower history tag, then lexicographic label set.
pub(crate) fn rank_order(a: &GlmbComponent, b: &GlmbComponent) -> Ordering {
    b.weight
        .total_cmp(&a.weight)
        .then_with(|| a.history.cmp(&b.history))
        .then_with(|| a.tracks.keys().cmp(b.tracks.keys()))
}

/// Labeled point estimate extracted from a density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledEstimate {
    pub label: Label,
    pub state: Vec<f64>,
}

/// Weighted mixture of labeled multi-target exponentials.
#[derive(Debug, Clone, PartialEq)]
pub struct GlmbDensity {
    components: Vec<GlmbComponent>,
}

impl GlmbDensity {
    /// Wraps components after checking weights and `(labels, history)`
    /// uniqueness. Weights are not rescaled; call [`GlmbDensity::normalize`].
    pub fn new(components: Vec<GlmbComponent>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Degenerate("density with no components".into()));
        }
        if components.iter().any(|c| !c.weight.is_finite() || c.weight < 0.0) {
            return Err(Error::Degenerate("negative or non-finite component weight".into()));
        }
        let mut seen = HashSet::with_capacity(components.len());
        for c in &components {
            if !seen.insert((c.label_vec(), c.history)) {
                return Err(Error::Degenerate(format!(
                    "duplicate component (history {})",
                    c.history
                )));
            }
        }
        Ok(Self { components })
    }

    /// Density of the certainly-empty multi-target state.
    pub fn empty() -> Self {
        Self {
            components: vec![GlmbComponent::empty(0, 1.0)],
        }
    }

    pub fn components(&self) -> &[GlmbComponent] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.components.iter().map(|c| c.weight).sum()
    }

    /// Largest history tag in use.
    pub fn max_history(&self) -> u64 {
        self.components.iter().map(|c| c.history).max().unwrap_or(0)
    }

    /// Rescales component weights to sum to one, preserving order.
    pub fn normalize(&self) -> Result<Self> {
        let total = self.total_weight();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::Degenerate("all component weights are zero".into()));
        }
        let components = self
            .components
            .iter()
            .map(|c| GlmbComponent {
                weight: c.weight / total,
                ..c.clone()
            })
            .collect();
        Ok(Self { components })
    }

    /// Keeps the `max_components` highest-ranked components and renormalizes.
    pub fn truncate(&self, max_components: usize) -> Result<Self> {
        self.truncate_with_discarded(max_components).map(|(d, _)| d)
    }

    /// As [`GlmbDensity::truncate`], also returning the discarded fraction of
    /// the total weight (the L1 truncation error before renormalizing).
    pub fn truncate_with_discarded(&self, max_components: usize) -> Result<(Self, f64)> {
        if max_components == 0 {
            return Err(Error::InvalidModel("max_components must be positive".into()));
        }
        let total = self.total_weight();
        let mut ranked: Vec<&GlmbComponent> = self.components.iter().collect();
        ranked.sort_by(|a, b| rank_order(a, b));
        ranked.truncate(max_components);
        let kept: f64 = ranked.iter().map(|c| c.weight).sum();
        let discarded = if total > 0.0 { 1.0 - kept / total } else { 0.0 };
        let density = Self {
            components: ranked.into_iter().cloned().collect(),
        }
        .normalize()?;
        Ok((density, discarded.max(0.0)))
    }

    /// Probability of each target count `0..=max cardinality`.
    pub fn cardinality_distribution(&self) -> Vec<f64> {
        let n_max = self.components.iter().map(|c| c.cardinality()).max().unwrap_or(0);
        let mut pmf = vec![0.0; n_max + 1];
        for c in &self.components {
            pmf[c.cardinality()] += c.weight;
        }
        pmf
    }

    /// MAP cardinality (ties resolve to the smaller count).
    pub fn map_cardinality(&self) -> usize {
        let pmf = self.cardinality_distribution();
        let mut best = 0;
        for (n, p) in pmf.iter().enumerate() {
            if *p > pmf[best] {
                best = n;
            }
        }
        best
    }

    /// MAP-cardinality estimator: the best-ranked component with the MAP
    /// cardinality, each track reported at its weighted particle mean.
    pub fn extract_estimates(&self) -> Vec<LabeledEstimate> {
        let n_star = self.map_cardinality();
        let best = self
            .components
            .iter()
            .filter(|c| c.cardinality() == n_star)
            .min_by(|a, b| rank_order(a, b));
        match best {
            Some(c) => c
                .tracks
                .iter()
                .map(|(label, p)| LabeledEstimate {
                    label: *label,
                    state: p.mean(),
                })
                .collect(),
            None => Vec::new(),
        }
    }

    /// Checks the normalization and label-distinctness invariants.
    pub fn check_invariants(&self, tol: f64) -> Result<()> {
        let total = self.total_weight();
        if (total - 1.0).abs() > tol {
            return Err(Error::Degenerate(format!("weights sum to {total}")));
        }
        let mut seen = HashSet::with_capacity(self.components.len());
        for c in &self.components {
            if !seen.insert((c.label_vec(), c.history)) {
                return Err(Error::Degenerate("duplicate (labels, history) pair".into()));
            }
        }
        Ok(())
    }

    /// Structured-text dump: one JSON object per component with its weight,
    /// history, labels and per-track means.
    pub fn debug_dump(&self) -> String {
        #[derive(Serialize)]
        struct Entry {
            weight: f64,
            history: u64,
            labels: Vec<Label>,
            means: Vec<Vec<f64>>,
        }
        let entries: Vec<Entry> = self
            .components
            .iter()
            .map(|c| Entry {
                weight: c.weight,
                history: c.history,
                labels: c.label_vec(),
                means: c.tracks.values().map(|p| p.mean()).collect(),
            })
            .collect();
        serde_json::to_string_pretty(&entries).expect("dump serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn track_at(x: f64) -> Arc<ParticleDensity> {
        Arc::new(ParticleDensity::point(&[x, 0.0]))
    }

    fn comp(history: u64, weight: f64, labels: &[(u32, u32)]) -> GlmbComponent {
        let tracks = labels
            .iter()
            .map(|&(t, i)| (Label::new(t, i), track_at(i as f64)))
            .collect();
        GlmbComponent::new(history, weight, tracks)
    }

    fn weights(d: &GlmbDensity) -> Vec<f64> {
        d.components().iter().map(|c| c.weight).collect()
    }

    #[test]
    fn normalize_examples() {
        let d = GlmbDensity::new(vec![comp(0, 0.2, &[]), comp(1, 0.2, &[(1, 1)])]).unwrap();
        assert_eq!(weights(&d.normalize().unwrap()), vec![0.5, 0.5]);

        let d = GlmbDensity::new(vec![comp(0, 1.0, &[(1, 1)])]).unwrap();
        assert_eq!(weights(&d.normalize().unwrap()), vec![1.0]);

        let d = GlmbDensity::new(vec![comp(0, 3.0, &[]), comp(1, 1.0, &[(1, 1)])]).unwrap();
        assert_eq!(weights(&d.normalize().unwrap()), vec![0.75, 0.25]);
    }

    #[test]
    fn normalize_rejects_all_zero() {
        let d = GlmbDensity::new(vec![comp(0, 0.0, &[]), comp(1, 0.0, &[(1, 1)])]).unwrap();
        assert!(matches!(d.normalize(), Err(Error::Degenerate(_))));
    }

    #[test]
    fn duplicate_components_rejected() {
        let r = GlmbDensity::new(vec![comp(3, 0.5, &[(1, 1)]), comp(3, 0.5, &[(1, 1)])]);
        assert!(r.is_err());
    }

    #[test]
    fn truncate_keeps_top_weights() {
        let d = GlmbDensity::new(vec![
            comp(0, 0.5, &[]),
            comp(1, 0.3, &[(1, 1)]),
            comp(2, 0.2, &[(1, 2)]),
        ])
        .unwrap();
        let t = d.truncate(2).unwrap();
        let w = weights(&t);
        assert_eq!(t.len(), 2);
        assert!((w[0] - 0.625).abs() < 1e-12 && (w[1] - 0.375).abs() < 1e-12);
        assert_eq!(t.components()[0].history, 0);

        let same = d.truncate(10).unwrap();
        assert_eq!(weights(&same), weights(&d.normalize().unwrap()));
    }

    #[test]
    fn truncate_tie_break_is_history_then_labels() {
        // Equal weights: history 1 and 2 win over 5; among history 1 the
        // lexicographically smaller label set comes first.
        let d = GlmbDensity::new(vec![
            comp(5, 0.25, &[]),
            comp(2, 0.25, &[(1, 1)]),
            comp(1, 0.25, &[(2, 1)]),
            comp(1, 0.25, &[(1, 2)]),
        ])
        .unwrap();
        let t = d.truncate(2).unwrap();
        let kept: Vec<(u64, Vec<Label>)> = t.components().iter().map(|c| (c.history, c.label_vec())).collect();
        assert_eq!(kept, vec![(1, vec![Label::new(1, 2)]), (1, vec![Label::new(2, 1)])]);
    }

    #[test]
    fn truncation_reports_discarded_mass() {
        let d = GlmbDensity::new(vec![
            comp(0, 0.5, &[]),
            comp(1, 0.3, &[(1, 1)]),
            comp(2, 0.2, &[(1, 2)]),
        ])
        .unwrap();
        let (_, discarded) = d.truncate_with_discarded(2).unwrap();
        assert!((discarded - 0.2).abs() < 1e-12);
    }

    #[test]
    fn cardinality_examples() {
        let d = GlmbDensity::new(vec![comp(0, 1.0, &[(1, 1), (1, 2)])]).unwrap();
        assert_eq!(d.cardinality_distribution(), vec![0.0, 0.0, 1.0]);

        let d = GlmbDensity::new(vec![comp(0, 0.6, &[(1, 1)]), comp(1, 0.4, &[(1, 1), (1, 2), (1, 3)])]).unwrap();
        assert_eq!(d.cardinality_distribution(), vec![0.0, 0.6, 0.0, 0.4]);

        let d = GlmbDensity::new(vec![
            comp(0, 0.25, &[]),
            comp(1, 0.25, &[(1, 1)]),
            comp(2, 0.25, &[(1, 2)]),
            comp(3, 0.25, &[(1, 1), (1, 2)]),
        ])
        .unwrap();
        assert_eq!(d.cardinality_distribution(), vec![0.25, 0.5, 0.25]);
    }

    #[test]
    fn extract_examples() {
        let p = ParticleDensity::uniform(2, vec![3.0, -1.0, 3.0, -1.0, 3.0, -1.0]).unwrap();
        let mut tracks = BTreeMap::new();
        tracks.insert(Label::new(1, 1), Arc::new(p));
        let d = GlmbDensity::new(vec![GlmbComponent::new(0, 1.0, tracks)]).unwrap();
        let est = d.extract_estimates();
        assert_eq!(est.len(), 1);
        assert_eq!(est[0].state, vec![3.0, -1.0]);

        assert!(GlmbDensity::empty().extract_estimates().is_empty());

        let d = GlmbDensity::new(vec![comp(0, 0.3, &[(1, 1)]), comp(1, 0.7, &[(1, 1), (1, 2)])]).unwrap();
        let est = d.extract_estimates();
        assert_eq!(est.len(), 2);
        assert_eq!(est[1].label, Label::new(1, 2));
    }

    #[test]
    fn map_cardinality_ties_go_low() {
        let d = GlmbDensity::new(vec![comp(0, 0.5, &[(1, 1)]), comp(1, 0.5, &[])]).unwrap();
        assert_eq!(d.map_cardinality(), 0);
    }

    #[test]
    fn particle_density_basics() {
        let p = ParticleDensity::new(1, vec![0.0, 2.0], vec![1.0, 3.0]).unwrap();
        assert!((p.weights().iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!((p.mean()[0] - 1.5).abs() < 1e-15);
        assert!(ParticleDensity::new(1, vec![], vec![]).is_err());
        assert!(ParticleDensity::new(1, vec![1.0], vec![0.0]).is_err());
        let child = p.with_weights(vec![1.0, 0.0]).unwrap();
        assert_eq!(child.mean(), vec![0.0]);
    }

    #[test]
    fn systematic_resampling_keeps_heavy_particle() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let p = ParticleDensity::new(1, vec![0.0, 5.0, 9.0], vec![0.0, 1.0, 0.0]).unwrap();
        let r = p.resample_systematic(&mut rng);
        assert_eq!(r.len(), 3);
        assert!(r.particles().all(|(x, _)| x[0] == 5.0));
    }

    #[test]
    fn dump_is_json() {
        let d = GlmbDensity::new(vec![comp(0, 1.0, &[(1, 1)])]).unwrap();
        let v: serde_json::Value = serde_json::from_str(&d.debug_dump()).unwrap();
        assert_eq!(v[0]["labels"][0]["birth_index"], 1);
    }

    fn arb_density() -> impl Strategy<Value = GlmbDensity> {
        prop::collection::vec((0.0f64..1.0, prop::collection::btree_set(1u32..5, 0..4)), 1..12)
            .prop_filter("positive mass", |v| v.iter().map(|(w, _)| w).sum::<f64>() > 1e-6)
            .prop_map(|v| {
                let comps = v
                    .into_iter()
                    .enumerate()
                    .map(|(h, (w, labels))| {
                        let ls: Vec<(u32, u32)> = labels.into_iter().map(|i| (1, i)).collect();
                        comp(h as u64, w, &ls)
                    })
                    .collect();
                GlmbDensity::new(comps).unwrap().normalize().unwrap()
            })
    }

    proptest! {
        #[test]
        fn truncate_is_idempotent(d in arb_density(), k in 1usize..8) {
            let once = d.truncate(k).unwrap();
            let twice = once.truncate(k).unwrap();
            prop_assert_eq!(once.len(), twice.len());
            for (a, b) in once.components().iter().zip(twice.components()) {
                prop_assert_eq!(a.history, b.history);
                prop_assert_eq!(a.label_vec(), b.label_vec());
                prop_assert!((a.weight - b.weight).abs() < 1e-12);
            }
            prop_assert!(twice.check_invariants(1e-9).is_ok());
        }

        #[test]
        fn cardinality_pmf_sums_to_one(d in arb_density()) {
            let s: f64 = d.cardinality_distribution().iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-9);
        }

        #[test]
        fn estimate_count_is_map_cardinality(d in arb_density()) {
            prop_assert_eq!(d.extract_estimates().len(), d.map_cardinality());
        }
    }
}
