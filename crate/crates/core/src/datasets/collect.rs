use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::CycleRecord;
use crate::demos::{select_demonstration, DistanceWeights, OdometryRecord};
use crate::error::{Error, Result};
use crate::planner::{
    evaluate, sample_policy_set, Mpc, PlannerConfig, PlanningContext, PolicySet, RewardWeights,
    Selection, Waypoint, K,
};
use crate::world::{wrap_angle, Scenario, ScenarioConfig, VehicleState, World};

/// Reward weights drawn uniformly from `[0, 1]^K`.
pub fn random_theta(seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..K).map(|_| rng.random::<f64>()).collect()
}

/// Output of an expert drive.
#[derive(Debug, Clone)]
pub struct ExpertRun {
    pub odometry: OdometryRecord,
    pub records: Vec<CycleRecord>,
    pub collisions: usize,
    pub stop_violations: usize,
    pub checkpoint_hits: Vec<bool>,
    pub stops_satisfied: Vec<bool>,
    pub fallbacks: usize,
}

fn strip(mut set: PolicySet) -> PolicySet {
    for p in &mut set.policies {
        p.states = Vec::new();
    }
    set
}

/// Drives `cycles` planning cycles with the expert planner, records the
/// executed odometry and one sequential record per cycle whose demonstration
/// is the re-projection of the expert's own odometry.
pub fn collect_expert(
    scenario: &ScenarioConfig,
    planner: &PlannerConfig,
    weights: &DistanceWeights,
    cycles: usize,
    seed: u64,
) -> Result<ExpertRun> {
    let mut world = World::new(Scenario::build(scenario)?);
    let mut mpc = Mpc::new(PlannerConfig {
        seed,
        ..planner.clone()
    })?;
    let mut odometry = OdometryRecord::from_states(&[world.ego])?;
    // Extra cycles so the last recorded horizon is covered by odometry.
    let extra = (planner.horizon / planner.cycle_period).ceil() as usize;
    let mut sets = Vec::with_capacity(cycles);
    let mut fallbacks = 0;
    for c in 0..cycles + extra {
        if c >= cycles && sets.is_empty() {
            break;
        }
        let out = mpc.step(&mut world, &Selection::Expert)?;
        fallbacks += out.fallback as usize;
        let n = planner.steps_per_cycle();
        odometry.extend_from_states(&out.set.policies[out.chosen].states[1..=n]);
        if c < cycles {
            let mut set = strip(out.set);
            set.sort_by_progress();
            sets.push(set);
        }
    }
    let theta = planner.expert_theta.clone();
    let records = sets
        .into_iter()
        .enumerate()
        .map(|(c, set)| {
            let demo = select_demonstration(&set, &odometry, weights)?;
            Ok(CycleRecord {
                cycle: c as u64,
                scenario_id: scenario.seed,
                ego: set.ego,
                theta: theta.clone(),
                set,
                demo,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExpertRun {
        odometry,
        records,
        collisions: world.collisions,
        stop_violations: world.stop_violations,
        checkpoint_hits: world.checkpoint_hits.clone(),
        stops_satisfied: world.stops_satisfied.clone(),
        fallbacks,
    })
}

/// Full vehicle state at odometry sample `i`; curvature and acceleration are
/// recovered by finite differences.
fn state_at(samples: &[Waypoint], i: usize) -> VehicleState {
    let s = samples[i];
    let (a, b) = (
        samples[i.saturating_sub(1)],
        samples[(i + 1).min(samples.len() - 1)],
    );
    let ds = (b.x - a.x).hypot(b.y - a.y);
    let curvature = if ds > 1e-6 {
        wrap_angle(b.yaw - a.yaw) / ds
    } else {
        0.0
    };
    let accel = if i > 0 {
        (s.v - a.v) / (s.t - a.t)
    } else {
        0.0
    };
    VehicleState {
        t: s.t,
        x: s.x,
        y: s.y,
        yaw: s.yaw,
        v: s.v,
        curvature,
        accel,
    }
}

/// Replays the expert odometry and, every cycle period, samples a policy set
/// evaluated under `theta0` and projects the odometry onto it. When
/// `per_cycle_theta` is set, `theta0` is re-drawn every cycle from `seed`.
#[allow(clippy::too_many_arguments)]
pub fn collect_training(
    scenario: &ScenarioConfig,
    planner: &PlannerConfig,
    weights: &DistanceWeights,
    odometry: &OdometryRecord,
    cycles: usize,
    seed: u64,
    theta0: &[f64],
    per_cycle_theta: bool,
) -> Result<Vec<CycleRecord>> {
    let mut world = World::new(Scenario::build(scenario)?);
    let samples = odometry.samples();
    let first = samples.first().ok_or(Error::Empty("odometry"))?;
    let start = world.ego;
    if (first.x - start.x).hypot(first.y - start.y) > 1e-6 || (first.t - start.t).abs() > 1e-9 {
        return Err(Error::invalid(
            "odometry",
            "does not start at the scenario's ego start",
        ));
    }
    let needed =
        first.t + (cycles.saturating_sub(1)) as f64 * planner.cycle_period + planner.horizon;
    if cycles > 0 && odometry.end_time() + 1e-9 < needed {
        return Err(Error::InsufficientOdometry {
            needed,
            available: odometry.end_time(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fixed = RewardWeights::new(theta0.to_vec())?;
    let mut cursor = 0usize;
    let mut records = Vec::with_capacity(cycles);
    for c in 0..cycles {
        let t = first.t + c as f64 * planner.cycle_period;
        let idx = samples.partition_point(|s| s.t < t - 1e-9);
        if idx >= samples.len() || (samples[idx].t - t).abs() > 1e-6 {
            return Err(Error::invalid(
                "odometry",
                format!("no sample at cycle time {t:.3}"),
            ));
        }
        if idx > cursor {
            let states: Vec<VehicleState> =
                (cursor + 1..=idx).map(|i| state_at(samples, i)).collect();
            world.advance(&states);
            cursor = idx;
        }
        world.ego = state_at(samples, idx);
        let ctx = PlanningContext::from_world(&world, planner)?;
        let cycle_seed: u64 = rng.random();
        let mut set = strip(sample_policy_set(&ctx, planner, c as u64, cycle_seed)?);
        let theta = if per_cycle_theta {
            RewardWeights::new(random_theta(rng.random()))?
        } else {
            fixed.clone()
        };
        evaluate(&mut set, &theta)?;
        set.sort_by_progress();
        let demo = select_demonstration(&set, odometry, weights)?;
        records.push(CycleRecord {
            cycle: c as u64,
            scenario_id: scenario.seed,
            ego: world.ego,
            theta: theta.theta,
            set,
            demo,
        });
    }
    Ok(records)
}
