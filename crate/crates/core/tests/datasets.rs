use pirl_core::datasets::synthetic::{sequential, two_task, SyntheticConfig};
use pirl_core::datasets::{
    collect_expert, collect_training, random_theta, CycleRecord, Dataset, DatasetManifest,
    RecordReader, Seeds, Split,
};
use pirl_core::demos::{policy_distance, DistanceWeights, OdometryRecord};
use pirl_core::irl::{ed, log_likelihood, maxent_gradient, opd};
use pirl_core::planner::{PlannerConfig, Waypoint, K};
use pirl_core::world::{Scenario, ScenarioConfig, StopLineSpec, World, KPH};
use pirl_core::Error;
use proptest::prelude::*;

fn manifest(sequential: bool) -> DatasetManifest {
    DatasetManifest::new("test", sequential, "abc", Seeds::default())
}

fn quiet_scenario() -> ScenarioConfig {
    ScenarioConfig {
        vehicle_count: 0,
        stop_lines: vec![],
        ..Default::default()
    }
}

#[test]
fn write_then_load_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SyntheticConfig::default();
    let train = two_task(500, 1, &cfg);
    let val = two_task(50, 2, &cfg);
    let ds = Dataset::create(
        dir.path(),
        "corpus",
        manifest(false),
        &[(Split::Train, &train), (Split::Val, &val)],
    )
    .unwrap();
    assert_eq!(ds.manifest.count(Split::Train), 500);
    let reopened = Dataset::open(&dir.path().join("corpus.json")).unwrap();
    let loaded = reopened.load(Split::Train, Some("abc"), None).unwrap();
    assert_eq!(loaded, train);
    assert_eq!(reopened.load(Split::Val, None, None).unwrap(), val);
    assert!(reopened.load(Split::Test, None, None).unwrap().is_empty());
    for (a, b) in loaded.iter().zip(&train) {
        assert_eq!(a.encode().unwrap(), b.encode().unwrap());
    }
}

#[test]
fn loaded_records_recompute_metrics_without_the_simulator() {
    let dir = tempfile::tempdir().unwrap();
    let records = two_task(20, 3, &SyntheticConfig::default());
    let ds = Dataset::create(dir.path(), "c", manifest(false), &[(Split::Test, &records)]).unwrap();
    let w = DistanceWeights::default();
    let theta = vec![0.4; K];
    for (a, b) in ds
        .load(Split::Test, None, None)
        .unwrap()
        .iter()
        .zip(&records)
    {
        assert_eq!(
            log_likelihood(&a.set, a.demo.index, &theta).unwrap(),
            log_likelihood(&b.set, b.demo.index, &theta).unwrap()
        );
        assert_eq!(
            maxent_gradient(&a.set, a.demo.index, &theta).unwrap(),
            maxent_gradient(&b.set, b.demo.index, &theta).unwrap()
        );
        assert_eq!(
            ed(&a.set, a.demo.index, &theta, &w).unwrap(),
            ed(&b.set, b.demo.index, &theta, &w).unwrap()
        );
        assert_eq!(
            opd(&a.set, a.demo.index, &theta, &w).unwrap(),
            opd(&b.set, b.demo.index, &theta, &w).unwrap()
        );
    }
}

#[test]
fn shuffling_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let records = two_task(40, 4, &SyntheticConfig::default());
    let ds = Dataset::create(
        dir.path(),
        "c",
        manifest(false),
        &[(Split::Train, &records)],
    )
    .unwrap();
    let a = ds.load(Split::Train, None, Some(7)).unwrap();
    let b = ds.load(Split::Train, None, Some(7)).unwrap();
    let c = ds.load(Split::Train, None, Some(8)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert_ne!(a, records);
    let mut cycles: Vec<u64> = a.iter().map(|r| r.cycle).collect();
    cycles.sort_unstable();
    assert_eq!(cycles, (0..40).collect::<Vec<_>>());
}

#[test]
fn sequential_splits_keep_order_and_refuse_shuffling() {
    let dir = tempfile::tempdir().unwrap();
    let records = sequential(30, &[10], 0, 5, &SyntheticConfig::default());
    let ds = Dataset::create(dir.path(), "s", manifest(true), &[(Split::Test, &records)]).unwrap();
    let loaded = ds.load(Split::Test, None, None).unwrap();
    assert!(loaded.windows(2).all(|w| w[1].cycle > w[0].cycle));
    assert!(matches!(
        ds.load(Split::Test, None, Some(1)),
        Err(Error::Invalid { .. })
    ));

    let mut unordered = records.clone();
    unordered.swap(3, 4);
    let err = Dataset::create(
        dir.path(),
        "bad",
        manifest(true),
        &[(Split::Test, &unordered)],
    )
    .unwrap_err();
    assert!(matches!(err, Error::Invalid { .. }));
}

#[test]
fn hash_mismatch_is_an_incompatible_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let records = two_task(3, 6, &SyntheticConfig::default());
    let ds = Dataset::create(
        dir.path(),
        "c",
        manifest(false),
        &[(Split::Train, &records)],
    )
    .unwrap();
    let err = ds.load(Split::Train, Some("other"), None).unwrap_err();
    assert!(matches!(err, Error::IncompatibleDataset { .. }));
    assert!(err.to_string().contains("incompatible dataset"));
}

#[test]
fn corrupted_files_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let records = two_task(5, 7, &SyntheticConfig::default());
    Dataset::create(
        dir.path(),
        "c",
        manifest(false),
        &[(Split::Train, &records)],
    )
    .unwrap();
    let path = dir.path().join("c-train.rec");
    let bytes = std::fs::read(&path).unwrap();

    std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
    let items: Vec<_> = RecordReader::open(&path).unwrap().collect();
    assert_eq!(items.len(), 5);
    assert!(items[..4].iter().all(Result::is_ok));
    assert!(items[4].is_err());

    let mut bad_magic = bytes.clone();
    bad_magic[0] ^= 0xff;
    std::fs::write(&path, &bad_magic).unwrap();
    assert!(RecordReader::open(&path).is_err());

    let one = records[0].encode().unwrap();
    assert!(CycleRecord::decode(&one[..one.len() / 2]).is_err());
}

#[test]
fn duplicate_files_in_a_manifest_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let records = two_task(2, 8, &SyntheticConfig::default());
    let ds = Dataset::create(
        dir.path(),
        "c",
        manifest(false),
        &[(Split::Train, &records)],
    )
    .unwrap();
    let mut m = ds.manifest.clone();
    m.files.push(m.files[0].clone());
    assert!(m.validate().is_err());
}

#[test]
fn zero_cycles_give_an_empty_valid_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = quiet_scenario();
    let world = World::new(Scenario::build(&scenario).unwrap());
    let odometry = OdometryRecord::from_states(&[world.ego]).unwrap();
    let records = collect_training(
        &scenario,
        &PlannerConfig::default(),
        &DistanceWeights::default(),
        &odometry,
        0,
        1,
        &random_theta(1),
        false,
    )
    .unwrap();
    assert!(records.is_empty());
    let ds = Dataset::create(
        dir.path(),
        "empty",
        manifest(false),
        &[(Split::Train, &records)],
    )
    .unwrap();
    assert!(Dataset::open(&dir.path().join("empty.json"))
        .unwrap()
        .load(Split::Train, None, None)
        .unwrap()
        .is_empty());
    assert_eq!(ds.manifest.count(Split::Train), 0);
}

#[test]
fn random_theta_is_uniform_in_the_unit_cube() {
    let t = random_theta(3);
    assert_eq!(t.len(), K);
    assert!(t.iter().all(|x| (0.0..1.0).contains(x)));
    assert_eq!(t, random_theta(3));
    assert_ne!(t, random_theta(4));
}

#[test]
fn expert_on_an_empty_road_reaches_target_speed_without_collisions() {
    let scenario = quiet_scenario();
    let planner = PlannerConfig::default();
    let run = collect_expert(&scenario, &planner, &DistanceWeights::default(), 60, 1).unwrap();
    assert_eq!(run.collisions, 0);
    assert_eq!(run.records.len(), 60);
    let target = scenario.target_speed_kph * KPH;
    let top = run
        .odometry
        .samples()
        .iter()
        .map(|s| s.v)
        .fold(0.0, f64::max);
    assert!(
        (top - target).abs() < 0.1 * target,
        "top speed {top} vs target {target}"
    );
    assert!(run.records.windows(2).all(|w| w[1].cycle > w[0].cycle));
}

#[test]
fn expert_stops_at_the_stop_line_and_reprojects_close_to_itself() {
    let scenario = ScenarioConfig {
        vehicle_count: 0,
        stop_lines: vec![StopLineSpec {
            station: 120.0,
            active: true,
        }],
        ..Default::default()
    };
    let planner = PlannerConfig::default();
    let w = DistanceWeights::default();
    let run = collect_expert(&scenario, &planner, &w, 50, 2).unwrap();
    assert_eq!(run.stops_satisfied, vec![true]);
    assert_eq!(run.stop_violations, 0);
    let world = World::new(Scenario::build(&scenario).unwrap());
    let net = &world.scenario.network;
    let at_line = run.odometry.samples().iter().any(|s| {
        let ahead = 120.0 - net.road_frame(s.x, s.y).0;
        (0.0..=2.0).contains(&ahead) && s.v < 0.3
    });
    assert!(at_line);

    // The executed policy is in every recorded set, so re-projection only
    // loses the replanning offset: far below the set's typical distance.
    for r in &run.records {
        let mut d: Vec<f64> = r
            .set
            .policies
            .iter()
            .map(|p| policy_distance(p, &run.odometry, &w).unwrap())
            .collect();
        d.sort_by(f64::total_cmp);
        assert!(r.demo.distance <= d[d.len() / 4]);
    }
    assert!(run
        .records
        .iter()
        .all(|r| r.demo.distance >= 0.0 && r.validate().is_ok()));

    // Replaying the odometry under a random reward reuses the same projection.
    let replay = collect_training(
        &scenario,
        &planner,
        &w,
        &run.odometry,
        20,
        3,
        &random_theta(3),
        false,
    )
    .unwrap();
    assert_eq!(replay.len(), 20);
    assert!(replay.iter().all(|r| r.theta == random_theta(3)));
    let per_cycle = collect_training(
        &scenario,
        &planner,
        &w,
        &run.odometry,
        5,
        3,
        &random_theta(3),
        true,
    )
    .unwrap();
    assert_ne!(per_cycle[0].theta, per_cycle[1].theta);
}

#[test]
fn odometry_from_another_timeline_is_rejected() {
    let scenario = quiet_scenario();
    let odometry = OdometryRecord::new(vec![Waypoint {
        t: 0.0,
        x: 1e4,
        y: 0.0,
        yaw: 0.0,
        v: 0.0,
    }])
    .unwrap();
    let err = collect_training(
        &scenario,
        &PlannerConfig::default(),
        &DistanceWeights::default(),
        &odometry,
        3,
        1,
        &random_theta(1),
        false,
    );
    assert!(err.is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn synthetic_records_round_trip(seed in any::<u64>(), n in 1usize..6) {
        for r in two_task(n, seed, &SyntheticConfig::default()) {
            let bytes = r.encode().unwrap();
            prop_assert_eq!(CycleRecord::decode(&bytes).unwrap(), r);
        }
    }
}
