//! Synthetic cycle records with known reward weights.
//!
//! Every cycle is a straight-road situation (ego speed, optional slower lead
//! vehicle) with policies built from per-action accelerations and a smooth
//! lane change. The demonstration is the optimum under the weights of the
//! cycle's task. Tasks share all features but disagree on their weighting;
//! the active task is additionally visible as a per-cycle constant on the
//! checkpoint-corridor feature, which leaves the policy distribution
//! unchanged but lets a set encoder recognise the situation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::CycleRecord;
use crate::demos::Demonstration;
use crate::planner::{
    feature, integrate_path, optimal_index, triangular_quantile, ControlAction, ControlPoint,
    Policy, PolicySet, RewardWeights, Waypoint, K,
};
use crate::world::{VehicleState, KPH};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub policies: usize,
    pub depth: usize,
    pub action_duration: f64,
    pub control_points: usize,
    pub state_dt: f64,
    pub target_speed: f64,
    pub lane_width: f64,
    /// Per-step value of the task cue feature in the second task.
    pub cue: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            policies: 64,
            depth: 4,
            action_duration: 1.5,
            control_points: 13,
            state_dt: 0.1,
            target_speed: 70.0 * KPH,
            lane_width: 3.5,
            cue: 0.5,
        }
    }
}

impl SyntheticConfig {
    fn horizon(&self) -> f64 {
        self.depth as f64 * self.action_duration
    }
}

/// Reward weights of the synthetic tasks: 0 is assertive (progress and speed
/// matter most), 1 is cautious (comfort, lane keeping and distance matter most).
pub fn task_theta(task: usize) -> Vec<f64> {
    use feature::*;
    let mut t = vec![0.0; K];
    if task == 0 {
        t[PROGRESS] = 3.0;
        t[SPEED_DEVIATION] = 1.0;
        t[ACCELERATION] = 0.1;
        t[JERK] = 0.05;
        t[LATERAL_OFFSET] = 0.1;
        t[HEADING_DEVIATION] = 0.1;
        t[LATERAL_ACCELERATION] = 0.1;
        t[PROXIMITY] = 1.0;
        t[CHECKPOINT_CORRIDOR] = 0.2;
    } else {
        t[PROGRESS] = 0.15;
        t[SPEED_DEVIATION] = 0.05;
        t[ACCELERATION] = 1.5;
        t[JERK] = 0.8;
        t[LATERAL_OFFSET] = 1.5;
        t[HEADING_DEVIATION] = 1.0;
        t[LATERAL_ACCELERATION] = 1.0;
        t[LATERAL_JERK] = 0.5;
        t[LANE_CHANGE_DELAY] = 1.0;
        t[PROXIMITY] = 4.0;
        t[CHECKPOINT_CORRIDOR] = 0.2;
    }
    t
}

#[derive(Debug, Clone, Copy)]
struct Situation {
    v0: f64,
    lead: Option<(f64, f64)>,
}

#[derive(Debug, Clone)]
struct PolicyParams {
    accels: Vec<f64>,
    lane: i32,
    lc_start: f64,
    lc_duration: f64,
}

fn smoothstep(u: f64) -> (f64, f64, f64, f64) {
    // Quintic blend with derivatives (value, d1, d2, d3) on [0, 1].
    if u <= 0.0 {
        return (0.0, 0.0, 0.0, 0.0);
    }
    if u >= 1.0 {
        return (1.0, 0.0, 0.0, 0.0);
    }
    let (u2, u3) = (u * u, u * u * u);
    (
        10.0 * u3 - 15.0 * u2 * u2 + 6.0 * u3 * u2,
        30.0 * u2 - 60.0 * u3 + 30.0 * u2 * u2,
        60.0 * u - 180.0 * u2 + 120.0 * u3,
        60.0 - 360.0 * u + 360.0 * u2,
    )
}

fn build_policy(
    sit: Situation,
    p: &PolicyParams,
    task: usize,
    t0: f64,
    cfg: &SyntheticConfig,
) -> Policy {
    let dt = cfg.state_dt;
    let horizon = cfg.horizon();
    let n = (horizon / dt).round() as usize;
    let per_action = (cfg.action_duration / dt).round() as usize;
    let cp_stride = n / (cfg.control_points - 1);
    let vt = cfg.target_speed;
    let half = cfg.lane_width / 2.0;
    let offset = p.lane as f64 * cfg.lane_width;

    let (mut x, mut v) = (0.0f64, sit.v0);
    let mut steps: Vec<[f64; K]> = Vec::with_capacity(n);
    let mut cps = Vec::with_capacity(cfg.control_points);
    let mut wps = Vec::with_capacity(cfg.control_points);
    for k in 0..=n {
        let t = k as f64 * dt;
        let (s, s1, s2, s3) = smoothstep((t - p.lc_start) / p.lc_duration);
        let y = offset * s;
        let yd = offset * s1 / p.lc_duration;
        let ydd = offset * s2 / p.lc_duration.powi(2);
        let yddd = offset * s3 / p.lc_duration.powi(3);
        let yaw = yd.atan2(v.max(0.5));
        if k % cp_stride == 0 {
            cps.push(ControlPoint {
                lateral: y,
                yaw,
                progress: x,
            });
            wps.push(Waypoint {
                t: t0 + t,
                x,
                y,
                yaw,
                v,
            });
        }
        if k == n {
            break;
        }
        let ai = (k / per_action).min(p.accels.len() - 1);
        let a = if v <= 0.0 && p.accels[ai] < 0.0 {
            0.0
        } else {
            p.accels[ai]
        };
        let prev = if ai == 0 { 0.0 } else { p.accels[ai - 1] };
        let mut f = [0.0; K];
        let lane_center = (y / cfg.lane_width).round() * cfg.lane_width;
        f[feature::LATERAL_OFFSET] = ((y - lane_center).abs() / half).min(1.0);
        f[feature::HEADING_DEVIATION] = (yaw.abs() / 0.5).min(1.0);
        f[feature::ACCELERATION] = (a.abs() / 5.0).min(1.0);
        f[feature::JERK] = ((p.accels[ai] - prev).abs() / cfg.action_duration / 4.0).min(1.0);
        f[feature::LATERAL_ACCELERATION] = (ydd.abs() / 4.0).min(1.0);
        f[feature::LATERAL_JERK] = (yddd.abs() / 4.0).min(1.0);
        f[feature::CURVATURE] = (ydd.abs() / v.max(1.0).powi(2) / 0.1).min(1.0);
        f[feature::SPEED_DEVIATION] = ((v - vt).abs() / vt).min(1.0);
        f[feature::PROGRESS] = 1.0 - (x / (vt * horizon)).clamp(0.0, 1.0);
        f[feature::LANE_CHANGE_DELAY] = (yd.abs() / 2.0 * (t / horizon)).min(1.0);
        if let Some((gap, speed)) = sit.lead {
            let lon = (x - (gap + speed * t)) / (4.5 + 4.0);
            let lat = y / (1.8 + 0.6);
            f[feature::PROXIMITY] = (1.0 / (lon * lon + lat * lat).powi(2)).min(1.0);
        }
        f[feature::CHECKPOINT_CORRIDOR] = if task == 1 { cfg.cue } else { 0.0 };
        steps.push(f);
        let v1 = (v + a * dt).max(0.0);
        x += 0.5 * (v + v1) * dt;
        v = v1;
    }
    let features = (0..K)
        .map(|i| integrate_path(&steps.iter().map(|f| f[i]).collect::<Vec<_>>(), dt, 1.0))
        .collect();
    let actions = p
        .accels
        .iter()
        .map(|&accel| ControlAction {
            accel,
            curvature_rate: 0.0,
            duration: cfg.action_duration,
        })
        .collect();
    Policy {
        actions,
        states: Vec::new(),
        features,
        control_points: cps,
        waypoints: wps,
        value: 0.0,
    }
}

fn random_situation(rng: &mut ChaCha8Rng) -> Situation {
    let v0 = rng.random_range(8.0..18.0);
    let lead = (rng.random::<f64>() < 0.7)
        .then(|| (rng.random_range(15.0..60.0), rng.random_range(4.0..14.0)));
    Situation { v0, lead }
}

fn random_params(rng: &mut ChaCha8Rng, cfg: &SyntheticConfig) -> PolicyParams {
    let accels = (0..cfg.depth)
        .map(|_| triangular_quantile(rng.random(), -5.0, 0.0, 2.5))
        .collect();
    let lane = match rng.random_range(0..4) {
        0 => -1,
        1 => 1,
        _ => 0,
    };
    PolicyParams {
        accels,
        lane,
        lc_start: rng.random_range(0.0..3.0),
        lc_duration: rng.random_range(2.0..4.0),
    }
}

fn record(
    cycle: u64,
    task: usize,
    sit: Situation,
    params: &[PolicyParams],
    cfg: &SyntheticConfig,
) -> CycleRecord {
    let t0 = cycle as f64 * 0.5;
    let policies = params
        .iter()
        .map(|p| build_policy(sit, p, task, t0, cfg))
        .collect();
    let ego = VehicleState {
        t: t0,
        v: sit.v0,
        ..Default::default()
    };
    let mut set = PolicySet {
        cycle,
        ego,
        policies,
        sorted: false,
    };
    set.sort_by_progress();
    let theta = task_theta(task);
    let w = RewardWeights::new(theta.clone()).expect("task weights are valid");
    for p in &mut set.policies {
        p.value = w.value(&p.features);
    }
    let index = optimal_index(set.policies.iter().map(|p| p.value));
    CycleRecord {
        cycle,
        scenario_id: task as u64,
        ego,
        theta,
        set,
        demo: Demonstration {
            index,
            distance: 0.0,
        },
    }
}

/// Independent cycles of task 0 only.
pub fn single_task(cycles: usize, seed: u64, cfg: &SyntheticConfig) -> Vec<CycleRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..cycles)
        .map(|c| {
            let sit = random_situation(&mut rng);
            let params: Vec<_> = (0..cfg.policies)
                .map(|_| random_params(&mut rng, cfg))
                .collect();
            record(c as u64, 0, sit, &params, cfg)
        })
        .collect()
}

/// Independent cycles with the task drawn uniformly per cycle.
pub fn two_task(cycles: usize, seed: u64, cfg: &SyntheticConfig) -> Vec<CycleRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..cycles)
        .map(|c| {
            let task = rng.random_range(0..2);
            let sit = random_situation(&mut rng);
            let params: Vec<_> = (0..cfg.policies)
                .map(|_| random_params(&mut rng, cfg))
                .collect();
            record(c as u64, task, sit, &params, cfg)
        })
        .collect()
}

/// Temporally coherent sequence: the situation and the sampled policies drift
/// slowly from cycle to cycle, and the task flips at every index in `switches`
/// (starting with `first_task`).
pub fn sequential(
    cycles: usize,
    switches: &[usize],
    first_task: usize,
    seed: u64,
    cfg: &SyntheticConfig,
) -> Vec<CycleRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sit = random_situation(&mut rng);
    let mut params: Vec<_> = (0..cfg.policies)
        .map(|_| random_params(&mut rng, cfg))
        .collect();
    let mut task = first_task;
    let mut out = Vec::with_capacity(cycles);
    for c in 0..cycles {
        if switches.contains(&c) {
            task = 1 - task;
        }
        if c > 0 {
            sit.v0 = (sit.v0 + rng.random_range(-0.1..0.1)).clamp(8.0, 18.0);
            if let Some((gap, speed)) = sit.lead.as_mut() {
                *gap = (*gap + rng.random_range(-0.3..0.3)).clamp(15.0, 60.0);
                *speed = (*speed + rng.random_range(-0.05..0.05)).clamp(4.0, 14.0);
            }
            for p in &mut params {
                for a in &mut p.accels {
                    *a = (*a + rng.random_range(-0.05..0.05)).clamp(-5.0, 2.5);
                }
                p.lc_start = (p.lc_start + rng.random_range(-0.02..0.02)).clamp(0.0, 3.0);
            }
        }
        out.push(record(c as u64, task, sit, &params, cfg));
    }
    out
}
