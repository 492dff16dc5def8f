//! Dataset collection.
//!
//! Every collection writes two datasets into the output directory:
//! `training.json`, independent cycles for reward learning, and
//! `expert.json`, sequential cycles for the temporal network and for
//! evaluation. Simulation collections additionally write the expert odometry
//! of every lap as `odometry-<lap>.csv`.

use std::path::Path;

use pirl_core::config::{CollectKind, Config};
use pirl_core::datasets::synthetic::{sequential, single_task, two_task};
use pirl_core::datasets::{
    collect_expert, collect_training, random_theta, CycleRecord, Dataset, DatasetManifest, Seeds,
    Split,
};
use pirl_core::world::ScenarioConfig;

use crate::error::Result;

pub const TRAINING: &str = "training";
pub const SEQUENCE: &str = "expert";

/// Cycle-index stride between laps, so laps never read as one sequence.
pub const LAP_STRIDE: u64 = 1_000_000;

pub fn odometry_file(lap: u64) -> String {
    format!("odometry-{lap}.csv")
}

/// Scenario seed of an odometry file name.
pub fn odometry_lap(name: &str) -> Option<u64> {
    name.strip_prefix("odometry-")?
        .strip_suffix(".csv")?
        .parse()
        .ok()
}

#[derive(Debug, Clone)]
pub struct Collected {
    pub training: Dataset,
    pub sequence: Dataset,
}

pub fn collect(config: &Config, seed: u64, out: &Path) -> Result<Collected> {
    std::fs::create_dir_all(out)?;
    match config.collect.kind {
        CollectKind::Simulation => simulate(config, seed, out),
        kind => synthesize(config, kind, seed, out),
    }
}

fn manifest(config: &Config, kind: &str, sequential: bool, seed: u64) -> DatasetManifest {
    DatasetManifest::new(
        kind,
        sequential,
        &config.data_hash(),
        Seeds {
            collection: seed,
            ..Default::default()
        },
    )
}

fn simulate(config: &Config, seed: u64, out: &Path) -> Result<Collected> {
    let c = &config.collect;
    let splits = [
        (Split::Train, &c.train_laps),
        (Split::Val, &c.val_laps),
        (Split::Test, &c.test_laps),
    ];
    let mut training: Vec<(Split, Vec<CycleRecord>)> = Vec::new();
    let mut expert: Vec<(Split, Vec<CycleRecord>)> = Vec::new();
    let mut odometry = Vec::new();
    let mut block = 0u64;
    for (split, laps) in splits {
        let (mut train_split, mut expert_split) = (Vec::new(), Vec::new());
        for &lap in laps.iter() {
            let scenario = ScenarioConfig {
                seed: lap,
                ..config.scenario.clone()
            };
            let run = collect_expert(&scenario, &config.planner, &config.distance, c.cycles, lap)?;
            log::info!(
                "lap {lap}: {} cycles, checkpoints {:?}, stops {:?}, {} collisions",
                run.records.len(),
                run.checkpoint_hits,
                run.stops_satisfied,
                run.collisions
            );
            let name = odometry_file(lap);
            run.odometry
                .write_csv(std::fs::File::create(out.join(&name))?)?;
            odometry.push(name);
            let lap_seed = seed.wrapping_add(lap);
            let theta0 = random_theta(lap_seed);
            let replay = collect_training(
                &scenario,
                &config.planner,
                &config.distance,
                &run.odometry,
                c.cycles,
                lap_seed,
                &theta0,
                c.per_cycle_theta,
            )?;
            let offset = block * LAP_STRIDE;
            block += 1;
            train_split.extend(replay.into_iter().map(|r| CycleRecord {
                cycle: r.cycle + offset,
                ..r
            }));
            expert_split.extend(run.records.into_iter().map(|r| CycleRecord {
                cycle: r.cycle + offset,
                ..r
            }));
        }
        training.push((split, train_split));
        expert.push((split, expert_split));
    }
    let write = |name: &str, sequential: bool, splits: &[(Split, Vec<CycleRecord>)]| {
        let mut m = manifest(config, "simulation", sequential, seed);
        m.odometry = odometry.clone();
        let refs: Vec<(Split, &[CycleRecord])> =
            splits.iter().map(|(s, r)| (*s, r.as_slice())).collect();
        Dataset::create(out, name, m, &refs)
    };
    Ok(Collected {
        training: write(TRAINING, false, &training)?,
        sequence: write(SEQUENCE, true, &expert)?,
    })
}

fn synthesize(config: &Config, kind: CollectKind, seed: u64, out: &Path) -> Result<Collected> {
    let c = &config.collect;
    let cfg = &c.synthetic;
    let n = c.cycles;
    let small = (n / 4).max(1);
    let independent = |cycles: usize, s: u64| match kind {
        CollectKind::TwoTask => two_task(cycles, s, cfg),
        _ => single_task(cycles, s, cfg),
    };
    let switches: &[usize] = if kind == CollectKind::TwoTask {
        &c.switches
    } else {
        &[]
    };
    let name = match kind {
        CollectKind::TwoTask => "two-task",
        _ => "single-task",
    };
    let train = independent(n, seed);
    let val = independent(small, seed.wrapping_add(1));
    let test = independent(n, seed.wrapping_add(2));
    let seq_train = sequential(n, switches, 0, seed.wrapping_add(3), cfg);
    let seq_test = sequential(n, switches, 0, seed.wrapping_add(4), cfg);
    let training = Dataset::create(
        out,
        TRAINING,
        manifest(config, name, false, seed),
        &[
            (Split::Train, &train),
            (Split::Val, &val),
            (Split::Test, &test),
        ],
    )?;
    let sequence = Dataset::create(
        out,
        SEQUENCE,
        manifest(config, name, true, seed),
        &[(Split::Train, &seq_train), (Split::Test, &seq_test)],
    )?;
    Ok(Collected { training, sequence })
}
