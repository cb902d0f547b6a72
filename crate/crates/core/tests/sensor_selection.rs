use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use passive_glmb::radar::{
    ideal_measurement, ClutterModel, DetectionModel, Measurement, MeasurementMessage, NoiseModel, RadarSensor,
    Receiver, StateLayout, Transmitter,
};
use passive_glmb::sensor::{
    dual_stage_fuse, dual_stage_order, fuse_in_order, permutation_count, pims, reward, select_exhaustive,
    select_greedy, select_random, RewardEvaluator, SelectionResult,
};
use passive_glmb::{update, Error, FilterParams, GlmbComponent, GlmbDensity, Label, ParticleDensity};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const PARTICLES: usize = 60;

fn params() -> FilterParams {
    FilterParams {
        max_components: 200,
        k_best_assignments: 20,
        resample_threshold: 0.0,
    }
}

fn sensor(id: u32, x: f64, y: f64) -> RadarSensor {
    RadarSensor {
        receiver: Receiver { id, position: [x, y] },
        transmitter: Transmitter { position: [0.0, 0.0] },
        detection: DetectionModel::default(),
        noise: NoiseModel::default(),
        clutter: ClutterModel::default(),
        layout: StateLayout { x: 0, y: 1 },
    }
}

fn cloud(center: [f64; 2], spread: f64, rng: &mut ChaCha8Rng) -> Arc<ParticleDensity> {
    let mut states = Vec::with_capacity(2 * PARTICLES);
    for _ in 0..PARTICLES {
        for c in center {
            states.push(c + spread * rng.sample::<f64, _>(StandardNormal));
        }
    }
    Arc::new(ParticleDensity::uniform(2, states).unwrap())
}

/// Components over subsets of the given targets, weighted towards the full set.
fn predicted(targets: &[[f64; 2]], seed: u64) -> GlmbDensity {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tracks: Vec<(Label, Arc<ParticleDensity>)> = targets
        .iter()
        .enumerate()
        .map(|(i, &t)| (Label::new(0, i as u32 + 1), cloud(t, 150.0, &mut rng)))
        .collect();
    let mut components = Vec::new();
    for mask in 0u32..(1 << tracks.len()) {
        let set: BTreeMap<_, _> = tracks
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, (l, p))| (*l, p.clone()))
            .collect();
        let weight = 0.05 + (set.len() * set.len()) as f64;
        components.push(GlmbComponent::new(0, weight, set));
    }
    GlmbDensity::new(components).unwrap().normalize().unwrap()
}

fn grid(n: u32) -> Vec<RadarSensor> {
    (0..n)
        .map(|i| sensor(i, 7500.0 * (i % 5) as f64, if i < 5 { 5000.0 } else { -5000.0 }))
        .collect()
}

#[test]
fn pims_has_one_ideal_measurement_per_estimate() {
    let rx = sensor(0, 3000.0, 4000.0);
    let empty = GlmbDensity::empty();
    assert!(pims(&empty, &rx).unwrap().is_empty());

    let one = predicted(&[[6000.0, 1000.0]], 1);
    let z = pims(&one, &rx).unwrap();
    assert_eq!(z.len(), 1);
    let est = &one.extract_estimates()[0];
    let ideal = ideal_measurement([est.state[0], est.state[1]], &rx.receiver, &rx.transmitter).unwrap();
    assert_eq!(z[0], ideal);

    let two = predicted(&[[6000.0, 1000.0], [-2000.0, 8000.0]], 1);
    let z = pims(&two, &rx).unwrap();
    let ests = two.extract_estimates();
    assert_eq!(z.len(), 2);
    assert!(ests[0].label < ests[1].label);
    for (m, e) in z.iter().zip(&ests) {
        assert_eq!(
            *m,
            ideal_measurement([e.state[0], e.state[1]], &rx.receiver, &rx.transmitter).unwrap()
        );
    }
}

#[test]
fn far_receiver_gives_no_reward_and_near_one_does() {
    let d = predicted(&[[10_000.0, 2000.0]], 2);
    let near = reward(&d, &sensor(0, 11_000.0, 3000.0), &params()).unwrap();
    let far = reward(&d, &sensor(1, 50_000.0, 3000.0), &params()).unwrap();
    let very_far = reward(&d, &sensor(2, 1e7, 0.0), &params()).unwrap();
    assert!(near > far, "{near} <= {far}");
    assert!(very_far < 1e-9, "{very_far}");
}

#[test]
fn duplicate_receivers_have_equal_rewards() {
    let d = predicted(&[[10_000.0, 2000.0], [20_000.0, -3000.0]], 3);
    let a = reward(&d, &sensor(4, 15_000.0, 5000.0), &params()).unwrap();
    let b = reward(&d, &sensor(9, 15_000.0, 5000.0), &params()).unwrap();
    assert!((a - b).abs() <= 1e-12);
}

#[test]
fn evaluation_counts_follow_closed_forms() {
    let d = predicted(&[[12_000.0, 1000.0]], 4);
    let all = grid(10);
    for (n, p) in [(10, 2), (10, 3), (4, 1), (5, 4), (3, 3)] {
        let cands = &all[..n];
        let g = select_greedy(&d, cands, p, &params()).unwrap();
        let expected: u64 = (0..p).map(|j| (n - j) as u64).sum();
        assert_eq!(g.evaluations, expected);
        assert_eq!(g.ordered_sensors.len(), p);
        assert_eq!(g.rewards.len(), p);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = select_random(&d, cands, p, &params(), &mut rng).unwrap();
        assert_eq!(r.evaluations, p as u64);
        assert_eq!(r.rewards.len(), p);
    }
    assert_eq!(select_greedy(&d, &all, 2, &params()).unwrap().evaluations, 19);
    assert_eq!(select_greedy(&d, &all, 3, &params()).unwrap().evaluations, 27);
    let e = select_exhaustive(&d, &all, 2, &params()).unwrap();
    assert_eq!(e.evaluations, 90);
    assert_eq!(permutation_count(6, 6), 720);
    assert_eq!(select_exhaustive(&d, &all[..6], 1, &params()).unwrap().evaluations, 6);
}

#[test]
fn greedy_and_exhaustive_agree_for_one_sensor() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for trial in 0..50 {
        let n_targets = rng.random_range(1..=2);
        let targets: Vec<[f64; 2]> = (0..n_targets)
            .map(|_| [rng.random_range(0.0..30_000.0), rng.random_range(-8000.0..8000.0)])
            .collect();
        let d = predicted(&targets, 100 + trial);
        let cands: Vec<RadarSensor> = (0..4)
            .map(|i| sensor(i, rng.random_range(0.0..30_000.0), rng.random_range(-8000.0..8000.0)))
            .collect();
        let g = select_greedy(&d, &cands, 1, &params()).unwrap();
        let e = select_exhaustive(&d, &cands, 1, &params()).unwrap();
        assert_eq!(g.ordered_sensors, e.ordered_sensors, "trial {trial}");
    }
}

#[test]
fn greedy_set_is_among_top_exhaustive_permutations() {
    let d = predicted(&[[8000.0, 3000.0], [22_000.0, -2000.0]], 6);
    let cands = vec![
        sensor(0, 8000.0, 5000.0),
        sensor(1, 22_000.0, -5000.0),
        sensor(2, 40_000.0, 9000.0),
    ];
    let greedy = select_greedy(&d, &cands, 2, &params()).unwrap();
    let greedy_set: BTreeSet<u32> = greedy.ordered_sensors.iter().copied().collect();

    let eval = RewardEvaluator::new(&d, &params());
    let mut scored = Vec::new();
    for a in 0..3 {
        for b in 0..3 {
            if a != b {
                let r = eval.sequence_reward(&[&cands[a], &cands[b]]).unwrap();
                scored.push((r, BTreeSet::from([a as u32, b as u32])));
            }
        }
    }
    scored.sort_by(|x, y| y.0.total_cmp(&x.0));
    assert_eq!(scored[0].1, greedy_set);
    let best = select_exhaustive(&d, &cands, 2, &params()).unwrap();
    assert_eq!(
        best.ordered_sensors.iter().copied().collect::<BTreeSet<_>>(),
        greedy_set
    );
}

#[test]
fn selection_argument_errors() {
    let d = predicted(&[[8000.0, 3000.0]], 7);
    let cands = grid(3);
    assert!(matches!(
        select_greedy(&d, &cands, 0, &params()),
        Err(Error::Selection(_))
    ));
    assert!(matches!(
        select_greedy(&d, &cands, 4, &params()),
        Err(Error::Selection(_))
    ));
    let many: Vec<RadarSensor> = (0..12).map(|i| sensor(i, 1000.0 * i as f64, 0.0)).collect();
    assert_eq!(permutation_count(12, 6), 665_280);
    assert!(matches!(
        select_exhaustive(&d, &many, 7, &params()),
        Err(Error::Selection(_))
    ));
}

#[test]
fn random_selection_is_uniform_and_reproducible() {
    let d = predicted(&[[8000.0, 3000.0]], 8);
    let cands = grid(10);
    let all = select_random(&d, &cands, 10, &params(), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    assert_eq!(
        all.ordered_sensors.iter().copied().collect::<BTreeSet<_>>(),
        (0..10).collect()
    );

    let a = select_random(&d, &cands, 3, &params(), &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
    let b = select_random(&d, &cands, 3, &params(), &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
    assert_eq!(a, b);

    // Inclusion frequency of each receiver is Binomial(n, P / N_s).
    let light = GlmbDensity::empty();
    let (draws, p, n) = (10_000, 3usize, 10usize);
    let mut counts = [0u32; 10];
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..draws {
        for id in select_random(&light, &cands, p, &params(), &mut rng)
            .unwrap()
            .ordered_sensors
        {
            counts[id as usize] += 1;
        }
    }
    let q = p as f64 / n as f64;
    let sd = (draws as f64 * q * (1.0 - q)).sqrt();
    for c in counts {
        assert!((c as f64 - draws as f64 * q).abs() < 3.0 * sd, "{counts:?}");
    }
}

#[test]
fn dual_stage_order_is_ascending_reward() {
    let sel = SelectionResult {
        ordered_sensors: vec![0, 1, 2],
        rewards: BTreeMap::from([(0, 0.5), (1, 0.2), (2, 0.9)]),
        evaluations: 3,
    };
    assert_eq!(dual_stage_order(&sel), vec![1, 0, 2]);
    let tied = SelectionResult {
        ordered_sensors: vec![7, 3],
        rewards: BTreeMap::from([(7, 1.0), (3, 1.0)]),
        evaluations: 2,
    };
    assert_eq!(dual_stage_order(&tied), vec![3, 7]);
}

fn scan(targets: &[[f64; 2]], s: &RadarSensor) -> Vec<Measurement> {
    targets
        .iter()
        .map(|&t| ideal_measurement(t, &s.receiver, &s.transmitter).unwrap())
        .collect()
}

#[test]
fn single_sensor_fusion_equals_one_update() {
    let targets = [[9000.0, 2500.0]];
    let d = predicted(&targets, 9);
    let s = sensor(3, 9000.0, 5000.0);
    let mut msg = MeasurementMessage::new(1);
    msg.sets.insert(3, scan(&targets, &s));
    let sel = SelectionResult {
        ordered_sensors: vec![3],
        rewards: BTreeMap::from([(3, 1.0)]),
        evaluations: 1,
    };
    let fused = dual_stage_fuse(&d, &sel, &msg, &[s], &params(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let direct = update(&d, &msg.sets[&3], &s, &params(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    assert_eq!(fused.density, direct.density);
}

#[test]
fn identical_sensors_fuse_order_free() {
    let targets = [[9000.0, 2500.0], [16_000.0, -1000.0]];
    let d = predicted(&targets, 10);
    let (a, b) = (sensor(1, 12_000.0, 5000.0), sensor(2, 12_000.0, 5000.0));
    let mut msg = MeasurementMessage::new(1);
    msg.sets.insert(1, scan(&targets, &a));
    msg.sets.insert(2, scan(&targets, &b));
    let sensors = [a, b];
    let ab = fuse_in_order(
        &d,
        &[1, 2],
        &msg,
        &sensors,
        &params(),
        &mut ChaCha8Rng::seed_from_u64(0),
    )
    .unwrap();
    let ba = fuse_in_order(
        &d,
        &[2, 1],
        &msg,
        &sensors,
        &params(),
        &mut ChaCha8Rng::seed_from_u64(0),
    )
    .unwrap();
    let weights = |g: &GlmbDensity| -> BTreeMap<Vec<Label>, f64> {
        let mut m = BTreeMap::new();
        for c in g.components() {
            *m.entry(c.label_vec()).or_insert(0.0) += c.weight;
        }
        m
    };
    let (wa, wb) = (weights(&ab.density), weights(&ba.density));
    assert_eq!(wa.keys().collect::<Vec<_>>(), wb.keys().collect::<Vec<_>>());
    for (k, v) in &wa {
        assert!((v - wb[k]).abs() < 1e-9);
    }
}

#[test]
fn fusion_output_is_valid_for_every_strategy() {
    let targets = [[9000.0, 2500.0], [21_000.0, -1500.0]];
    let d = predicted(&targets, 11);
    let cands = grid(10);
    let mut msg = MeasurementMessage::new(1);
    for s in &cands {
        msg.sets.insert(s.id(), scan(&targets, s));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let selections = [
        select_greedy(&d, &cands, 3, &params()).unwrap(),
        select_exhaustive(&d, &cands[..5], 2, &params()).unwrap(),
        select_random(&d, &cands, 3, &params(), &mut rng).unwrap(),
    ];
    for sel in &selections {
        let out = dual_stage_fuse(&d, sel, &msg, &cands, &params(), &mut rng).unwrap();
        out.density.check_invariants(1e-9).unwrap();
    }
    let mut partial = msg.clone();
    partial.sets.remove(&selections[0].ordered_sensors[0]);
    let missing = dual_stage_fuse(&d, &selections[0], &partial, &cands, &params(), &mut rng);
    assert!(matches!(missing, Err(Error::MissingMeasurements(_))));
}
