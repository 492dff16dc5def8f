use pirl_core::datasets::synthetic::{single_task, SyntheticConfig};
use pirl_core::datasets::CycleRecord;
use pirl_core::demos::{Demonstration, DistanceWeights};
use pirl_core::irl::{
    ed, evaluate_records, evd, log_likelihood, maxent_gradient, opd, policy_distribution,
    train_lirl, LirlConfig,
};
use pirl_core::planner::{Policy, PolicySet, Waypoint, K};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_set(rng: &mut ChaCha8Rng, n: usize, points: usize) -> PolicySet {
    let policies = (0..n)
        .map(|_| Policy {
            features: (0..K).map(|_| rng.random_range(0.0..4.0)).collect(),
            waypoints: (0..points)
                .map(|j| Waypoint {
                    t: j as f64 * 0.5,
                    x: rng.random_range(-20.0..20.0),
                    y: rng.random_range(-5.0..5.0),
                    yaw: rng.random_range(-3.0..3.0),
                    v: rng.random_range(0.0..20.0),
                })
                .collect(),
            ..Default::default()
        })
        .collect();
    PolicySet {
        policies,
        ..Default::default()
    }
}

fn random_theta(rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..K).map(|_| rng.random_range(0.0..1.5)).collect()
}

// Test-side oracles, written from the definitions without shared helpers.

fn naive_probabilities(set: &PolicySet, theta: &[f64]) -> Vec<f64> {
    let weights: Vec<f64> = set
        .policies
        .iter()
        .map(|p| {
            (-p.features
                .iter()
                .zip(theta)
                .map(|(f, t)| f * t)
                .sum::<f64>())
            .exp()
        })
        .collect();
    let z: f64 = weights.iter().sum();
    weights.iter().map(|w| w / z).collect()
}

fn naive_value(p: &Policy, theta: &[f64]) -> f64 {
    -(0..K).map(|i| theta[i] * p.features[i]).sum::<f64>()
}

fn naive_distance(a: &Policy, b: &Policy, w: &DistanceWeights) -> f64 {
    let mut sum = 0.0;
    for (p, q) in a.waypoints.iter().zip(&b.waypoints) {
        let mut dyaw = (p.yaw - q.yaw) % std::f64::consts::TAU;
        if dyaw > std::f64::consts::PI {
            dyaw -= std::f64::consts::TAU;
        } else if dyaw < -std::f64::consts::PI {
            dyaw += std::f64::consts::TAU;
        }
        sum += w.pos * ((p.x - q.x).powi(2) + (p.y - q.y).powi(2))
            + w.yaw * dyaw.powi(2)
            + w.v * (p.v - q.v).powi(2);
    }
    sum.sqrt() / a.waypoints.len() as f64
}

fn naive_normalized(set: &PolicySet, demo: usize, w: &DistanceWeights) -> Vec<f64> {
    let d: Vec<f64> = set
        .policies
        .iter()
        .map(|p| naive_distance(p, &set.policies[demo], w))
        .collect();
    let max = d.iter().cloned().fold(0.0, f64::max);
    d.iter()
        .map(|x| if max > 0.0 { x / max } else { 0.0 })
        .collect()
}

fn naive_argmax(set: &PolicySet, theta: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..set.len() {
        if naive_value(&set.policies[i], theta) > naive_value(&set.policies[best], theta) {
            best = i;
        }
    }
    best
}

#[test]
fn gradient_matches_central_differences_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let h = 1e-5;
    for _ in 0..100 {
        let n = rng.random_range(1..=16);
        let set = random_set(&mut rng, n, 3);
        let demo = rng.random_range(0..n);
        let theta = random_theta(&mut rng);
        let g = maxent_gradient(&set, demo, &theta).unwrap();
        assert_eq!(g.len(), K);
        let scale = g.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        for i in 0..K {
            let mut plus = theta.clone();
            let mut minus = theta.clone();
            plus[i] += h;
            minus[i] -= h;
            let fd = (log_likelihood(&set, demo, &plus).unwrap()
                - log_likelihood(&set, demo, &minus).unwrap())
                / (2.0 * h);
            assert!(
                (fd - g[i]).abs() <= 1e-6 * scale,
                "component {i}: analytic {} vs fd {fd}",
                g[i]
            );
        }
    }
}

#[test]
fn metrics_match_brute_force_recomputation() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let w = DistanceWeights::default();
    for _ in 0..200 {
        let n = rng.random_range(1..=24);
        let set = random_set(&mut rng, n, 13);
        let demo = rng.random_range(0..n);
        let theta = random_theta(&mut rng);
        let p = naive_probabilities(&set, &theta);
        let dist = policy_distribution(&set, &theta).unwrap();
        for (a, b) in dist.probabilities.iter().zip(&p) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((log_likelihood(&set, demo, &theta).unwrap().exp() - p[demo]).abs() < 1e-12);

        let vd = naive_value(&set.policies[demo], &theta);
        let expected: f64 = set
            .policies
            .iter()
            .zip(&p)
            .map(|(pi, q)| q * naive_value(pi, &theta))
            .sum();
        let evd_oracle = (vd - expected).abs() / vd.abs();
        assert!((evd(&set, demo, &theta).unwrap().unwrap() - evd_oracle).abs() < 1e-12);

        let d = naive_normalized(&set, demo, &w);
        let ed_oracle: f64 = p.iter().zip(&d).map(|(q, x)| q * x).sum();
        assert!((ed(&set, demo, &theta, &w).unwrap() - ed_oracle).abs() < 1e-12);
        let opd_oracle = d[naive_argmax(&set, &theta)];
        assert!((opd(&set, demo, &theta, &w).unwrap() - opd_oracle).abs() < 1e-12);
    }
}

#[test]
fn forward_passes_stay_normalized_over_a_fuzz_run() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let w = DistanceWeights::default();
    for _ in 0..1000 {
        let n = rng.random_range(1..=32);
        let points = rng.random_range(1..=13);
        let mut set = random_set(&mut rng, n, points);
        // Occasionally extreme weights and duplicated policies.
        let mut theta = random_theta(&mut rng);
        if rng.random_bool(0.2) {
            theta.iter_mut().for_each(|t| *t *= 200.0);
        }
        if n > 1 && rng.random_bool(0.2) {
            set.policies[1] = set.policies[0].clone();
        }
        let demo = rng.random_range(0..n);
        let dist = policy_distribution(&set, &theta).unwrap();
        assert!(dist
            .probabilities
            .iter()
            .all(|p| p.is_finite() && *p >= 0.0));
        assert!((dist.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(log_likelihood(&set, demo, &theta).unwrap() <= 0.0);
        let e = ed(&set, demo, &theta, &w).unwrap();
        let o = opd(&set, demo, &theta, &w).unwrap();
        assert!((0.0..=1.0 + 1e-12).contains(&e));
        assert!((0.0..=1.0).contains(&o));
        assert!(maxent_gradient(&set, demo, &theta)
            .unwrap()
            .iter()
            .all(|g| g.is_finite()));
    }
}

#[test]
fn singleton_demonstration_has_zero_metrics() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let set = random_set(&mut rng, 1, 13);
    let theta = random_theta(&mut rng);
    let w = DistanceWeights::default();
    assert_eq!(evd(&set, 0, &theta).unwrap(), Some(0.0));
    assert_eq!(ed(&set, 0, &theta, &w).unwrap(), 0.0);
    assert_eq!(opd(&set, 0, &theta, &w).unwrap(), 0.0);
    assert!(maxent_gradient(&set, 0, &theta)
        .unwrap()
        .iter()
        .all(|g| *g == 0.0));
}

#[test]
fn identical_policies_split_mass_evenly() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let mut set = random_set(&mut rng, 2, 3);
    set.policies[1] = set.policies[0].clone();
    let p = policy_distribution(&set, &random_theta(&mut rng))
        .unwrap()
        .probabilities;
    assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] - 0.5).abs() < 1e-15);
}

#[test]
fn uniform_weights_average_the_normalized_distances() {
    let w = DistanceWeights::default();
    let point = |x: f64| Waypoint {
        t: 0.0,
        x,
        y: 0.0,
        yaw: 0.0,
        v: 0.0,
    };
    let set = PolicySet {
        policies: vec![
            Policy {
                features: vec![0.0; K],
                waypoints: vec![point(0.0)],
                ..Default::default()
            },
            Policy {
                features: vec![1.0; K],
                waypoints: vec![point(3.0)],
                ..Default::default()
            },
        ],
        ..Default::default()
    };
    assert!((ed(&set, 0, &[0.0; K], &w).unwrap() - 0.5).abs() < 1e-15);
    // Tie at zero weights goes to index 0, the demonstration itself.
    assert_eq!(opd(&set, 0, &[0.0; K], &w).unwrap(), 0.0);
    assert_eq!(opd(&set, 1, &[0.0; K], &w).unwrap(), 1.0);
}

#[test]
fn degenerate_demonstration_value_is_flagged() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let mut set = random_set(&mut rng, 4, 3);
    set.policies[2].features = vec![0.0; K];
    assert_eq!(evd(&set, 2, &random_theta(&mut rng)).unwrap(), None);
}

proptest! {
    #[test]
    fn common_feature_offset_leaves_distribution_unchanged(seed in any::<u64>(), n in 1usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let set = random_set(&mut rng, n, 2);
        let theta = random_theta(&mut rng);
        let offset: Vec<f64> = (0..K).map(|_| rng.random_range(0.0..3.0)).collect();
        let mut shifted = set.clone();
        for p in &mut shifted.policies {
            for (f, o) in p.features.iter_mut().zip(&offset) {
                *f += o;
            }
        }
        let a = policy_distribution(&set, &theta).unwrap().probabilities;
        let b = policy_distribution(&shifted, &theta).unwrap().probabilities;
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn scaling_weights_keeps_opd(seed in any::<u64>(), n in 1usize..16, c in 1.0f64..50.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let set = random_set(&mut rng, n, 4);
        let demo = rng.random_range(0..n);
        let theta = random_theta(&mut rng);
        let scaled: Vec<f64> = theta.iter().map(|t| t * c).collect();
        let w = DistanceWeights::default();
        prop_assert_eq!(opd(&set, demo, &theta, &w).unwrap(), opd(&set, demo, &scaled, &w).unwrap());
    }
}

fn minimal_demo_records(rng: &mut ChaCha8Rng, count: usize) -> Vec<CycleRecord> {
    (0..count)
        .map(|c| {
            let mut set = random_set(rng, 8, 3);
            // The demonstration is feature-wise below every other policy.
            set.policies[0].features = set.policies[0].features.iter().map(|f| f * 0.1).collect();
            for p in set.policies.iter_mut().skip(1) {
                for f in p.features.iter_mut() {
                    *f += 0.5;
                }
            }
            CycleRecord {
                cycle: c as u64,
                set,
                demo: Demonstration {
                    index: 0,
                    distance: 0.0,
                },
                ..Default::default()
            }
        })
        .collect()
}

fn mean_log_likelihood(records: &[CycleRecord], theta: &[f64]) -> f64 {
    records
        .iter()
        .map(|r| log_likelihood(&r.set, r.demo.index, theta).unwrap())
        .sum::<f64>()
        / records.len() as f64
}

#[test]
fn lirl_increases_likelihood_when_the_demo_is_feature_wise_minimal() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let records = minimal_demo_records(&mut rng, 10);
    let config = LirlConfig {
        epochs: 20,
        step: 0.01,
        batch_size: 4,
        ..Default::default()
    };
    let run = train_lirl(&records, &[], &config, 3, &DistanceWeights::default()).unwrap();
    let ll: Vec<f64> = run
        .trajectory
        .iter()
        .map(|t| mean_log_likelihood(&records, t))
        .collect();
    assert!(ll.windows(2).all(|w| w[1] > w[0]), "{ll:?}");
    assert!(run.trajectory.iter().flatten().all(|t| *t >= 0.0));
}

#[test]
fn zero_epochs_return_the_initial_weights() {
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    let records = minimal_demo_records(&mut rng, 3);
    let config = LirlConfig {
        epochs: 0,
        ..Default::default()
    };
    let run = train_lirl(&records, &[], &config, 1, &DistanceWeights::default()).unwrap();
    assert_eq!(run.theta.theta, config.initial_theta);
    assert!(run.metrics.is_empty());
}

#[test]
fn single_cycle_training_raises_demo_probability() {
    let records = single_task(1, 4, &SyntheticConfig::default());
    let config = LirlConfig {
        epochs: 30,
        ..Default::default()
    };
    let run = train_lirl(&records, &[], &config, 1, &DistanceWeights::default()).unwrap();
    let r = &records[0];
    let before = log_likelihood(&r.set, r.demo.index, &config.initial_theta).unwrap();
    let after = log_likelihood(&r.set, r.demo.index, &run.theta.theta).unwrap();
    assert!(after > before);
}

#[test]
fn lirl_is_deterministic_and_validates_every_fifth_epoch() {
    let cfg = SyntheticConfig::default();
    let train = single_task(40, 5, &cfg);
    let val = single_task(10, 6, &cfg);
    let config = LirlConfig {
        epochs: 10,
        ..Default::default()
    };
    let w = DistanceWeights::default();
    let a = train_lirl(&train, &val, &config, 9, &w).unwrap();
    let b = train_lirl(&train, &val, &config, 9, &w).unwrap();
    assert_eq!(a.trajectory, b.trajectory);
    let validated: Vec<usize> = a
        .metrics
        .iter()
        .filter(|m| m.validation.is_some())
        .map(|m| m.epoch)
        .collect();
    assert_eq!(validated, vec![5, 10]);
    let e = evaluate_records(&val, |_| a.theta.theta.clone(), &w).unwrap();
    assert_eq!(Some(e), a.metrics.last().unwrap().validation);
}

#[test]
fn empty_inputs_are_errors() {
    let w = DistanceWeights::default();
    assert!(train_lirl(&[], &[], &LirlConfig::default(), 1, &w).is_err());
    assert!(policy_distribution(&PolicySet::default(), &[0.0; K]).is_err());
    assert!(evaluate_records(&[], |_| vec![0.0; K], &w).is_err());
}
