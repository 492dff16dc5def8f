//! Sampling-based model-predictive trajectory planner.
//!
//! A planning cycle samples an action tree from the ego state, integrates
//! every root-to-leaf action sequence into a [`Policy`], computes the
//! path-integral reward features and control points, and picks the optimal
//! policy under a linear reward `R = -theta . f`.

mod context;
mod features;
mod integrate;
mod mpc;
mod sampling;
mod select;

use serde::{Deserialize, Serialize};

pub use context::PlanningContext;
pub use features::{integrate_path, path_integral_features, step_features, FeatureScales};
pub use integrate::{integrate, integrate_with_substep};
pub use mpc::{Mpc, Selection, StepOutcome};
pub use sampling::{sample_policy_set, triangular_quantile};
pub use select::{evaluate, expert_select, min_predicted_gap, optimal_index, ExpertChoice};

use crate::error::{Error, Result};
use crate::world::VehicleState;

/// Number of reward features.
pub const K: usize = 15;

pub const FEATURE_NAMES: [&str; K] = [
    "lateral_offset",
    "heading_deviation",
    "off_road",
    "acceleration",
    "jerk",
    "lateral_acceleration",
    "lateral_jerk",
    "curvature",
    "speed_deviation",
    "progress",
    "lane_change_delay",
    "lateral_overshoot",
    "proximity",
    "stop_violation",
    "checkpoint_corridor",
];

/// Feature indices, in [`FEATURE_NAMES`] order.
pub mod feature {
    pub const LATERAL_OFFSET: usize = 0;
    pub const HEADING_DEVIATION: usize = 1;
    pub const OFF_ROAD: usize = 2;
    pub const ACCELERATION: usize = 3;
    pub const JERK: usize = 4;
    pub const LATERAL_ACCELERATION: usize = 5;
    pub const LATERAL_JERK: usize = 6;
    pub const CURVATURE: usize = 7;
    pub const SPEED_DEVIATION: usize = 8;
    pub const PROGRESS: usize = 9;
    pub const LANE_CHANGE_DELAY: usize = 10;
    pub const LATERAL_OVERSHOOT: usize = 11;
    pub const PROXIMITY: usize = 12;
    pub const STOP_VIOLATION: usize = 13;
    pub const CHECKPOINT_CORRIDOR: usize = 14;
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlAction {
    /// m/s^2
    pub accel: f64,
    /// 1/(m s)
    pub curvature_rate: f64,
    /// s
    pub duration: f64,
}

/// Time-equidistant control point: lateral offset and yaw relative to the
/// ego start, and route progress.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlPoint {
    pub lateral: f64,
    pub yaw: f64,
    pub progress: f64,
}

/// Pose sample at a control-point time, used for distance metrics.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Waypoint {
    /// Absolute time in s.
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
    pub v: f64,
}

impl From<&VehicleState> for Waypoint {
    fn from(s: &VehicleState) -> Self {
        Self {
            t: s.t,
            x: s.x,
            y: s.y,
            yaw: s.yaw,
            v: s.v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Policy {
    pub actions: Vec<ControlAction>,
    /// Integrated states at `state_dt` spacing; empty for policies loaded from datasets.
    pub states: Vec<VehicleState>,
    pub features: Vec<f64>,
    pub control_points: Vec<ControlPoint>,
    pub waypoints: Vec<Waypoint>,
    pub value: f64,
}

impl Policy {
    /// Route progress at the last control point.
    pub fn final_progress(&self) -> f64 {
        self.control_points.last().map_or(0.0, |c| c.progress)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PolicySet {
    pub cycle: u64,
    pub ego: VehicleState,
    pub policies: Vec<Policy>,
    pub sorted: bool,
}

impl PolicySet {
    pub fn len(&self) -> usize {
        self.policies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.policies.is_empty()
    }

    /// Stable sort ascending by final route progress. Returns the permutation
    /// `new_index -> old_index`.
    pub fn sort_by_progress(&mut self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.policies.len()).collect();
        order.sort_by(|&a, &b| {
            self.policies[a]
                .final_progress()
                .total_cmp(&self.policies[b].final_progress())
                .then(a.cmp(&b))
        });
        let mut old: Vec<Option<Policy>> = std::mem::take(&mut self.policies)
            .into_iter()
            .map(Some)
            .collect();
        self.policies = order.iter().map(|&i| old[i].take().unwrap()).collect();
        self.sorted = true;
        order
    }

    pub fn feature_matrix(&self) -> Vec<&[f64]> {
        self.policies
            .iter()
            .map(|p| p.features.as_slice())
            .collect()
    }
}

/// Linear reward weights; the reward of a feature vector is `-theta . f`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardWeights {
    pub theta: Vec<f64>,
}

impl RewardWeights {
    pub fn new(theta: Vec<f64>) -> Result<Self> {
        if theta.len() != K {
            return Err(Error::dims(K, theta.len()));
        }
        if theta.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(Error::invalid(
                "reward weights",
                "entries must be finite and non-negative",
            ));
        }
        Ok(Self { theta })
    }

    pub fn zeros() -> Self {
        Self {
            theta: vec![0.0; K],
        }
    }

    pub fn names() -> &'static [&'static str; K] {
        &FEATURE_NAMES
    }

    pub fn value(&self, features: &[f64]) -> f64 {
        -self
            .theta
            .iter()
            .zip(features)
            .map(|(t, f)| t * f)
            .sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    pub horizon: f64,
    pub depth: usize,
    pub branching: usize,
    pub action_duration: f64,
    pub control_points: usize,
    pub state_dt: f64,
    pub substep: f64,
    /// Per-second discount of the path integral.
    pub gamma: f64,
    pub cycle_period: f64,
    pub seed: u64,
    pub max_policies: u64,
    pub accel_min: f64,
    pub accel_max: f64,
    pub accel_comfort: f64,
    pub curvature_max: f64,
    pub curvature_rate_max: f64,
    pub lookahead_time: f64,
    pub lookahead_min: f64,
    pub safety_margin: f64,
    pub progress_bonus: f64,
    pub expert_theta: Vec<f64>,
    pub scales: FeatureScales,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            horizon: 6.0,
            depth: 4,
            branching: 4,
            action_duration: 1.5,
            control_points: 13,
            state_dt: 0.1,
            substep: 0.05,
            gamma: 1.0,
            cycle_period: 0.5,
            seed: 11,
            max_policies: 20_000,
            accel_min: -5.0,
            accel_max: 2.5,
            accel_comfort: 0.0,
            curvature_max: 0.2,
            curvature_rate_max: 0.15,
            lookahead_time: 2.5,
            lookahead_min: 15.0,
            safety_margin: 1.0,
            progress_bonus: 2.0,
            expert_theta: default_expert_theta(),
            scales: FeatureScales::default(),
        }
    }
}

/// Manually tuned weights of the expert planner.
pub fn default_expert_theta() -> Vec<f64> {
    vec![
        0.3, 0.3, 20.0, 0.2, 0.2, 0.4, 0.2, 0.2, 1.0, 2.0, 0.5, 1.0, 8.0, 30.0, 1.5,
    ]
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |r: &str| Err(Error::invalid("planner config", r.to_string()));
        if self.depth == 0 || self.branching == 0 {
            return bad("depth and branching must be positive");
        }
        if !(self.state_dt > 0.0 && self.substep > 0.0 && self.action_duration > 0.0) {
            return bad("time steps must be positive");
        }
        if (self.depth as f64 * self.action_duration - self.horizon).abs() > 1e-9 {
            return bad("horizon must equal depth * action_duration");
        }
        let steps = |d: f64| (d / self.state_dt).round();
        if (steps(self.action_duration) * self.state_dt - self.action_duration).abs() > 1e-9 {
            return bad("action_duration must be a multiple of state_dt");
        }
        if self.control_points < 2 {
            return bad("need at least two control points");
        }
        let cp_dt = self.horizon / (self.control_points - 1) as f64;
        if (steps(cp_dt) * self.state_dt - cp_dt).abs() > 1e-9 {
            return bad("control-point spacing must be a multiple of state_dt");
        }
        if self.cycle_period <= 0.0 || self.cycle_period > self.horizon + 1e-12 {
            return bad("cycle period must lie in (0, horizon]");
        }
        if (steps(self.cycle_period) * self.state_dt - self.cycle_period).abs() > 1e-9 {
            return bad("cycle period must be a multiple of state_dt");
        }
        if !(self.accel_min < self.accel_comfort && self.accel_comfort < self.accel_max) {
            return bad("accel_min < accel_comfort < accel_max required");
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must lie in (0, 1]");
        }
        RewardWeights::new(self.expert_theta.clone())?;
        Ok(())
    }

    pub fn steps_per_horizon(&self) -> usize {
        (self.horizon / self.state_dt).round() as usize
    }

    pub fn steps_per_action(&self) -> usize {
        (self.action_duration / self.state_dt).round() as usize
    }

    pub fn steps_per_cycle(&self) -> usize {
        (self.cycle_period / self.state_dt).round() as usize
    }

    /// State indices of the control points.
    pub fn control_point_indices(&self) -> Vec<usize> {
        let stride = self.steps_per_horizon() / (self.control_points - 1);
        (0..self.control_points).map(|j| j * stride).collect()
    }

    /// Control-point times relative to the cycle start.
    pub fn control_point_times(&self) -> Vec<f64> {
        let dt = self.horizon / (self.control_points - 1) as f64;
        (0..self.control_points).map(|j| j as f64 * dt).collect()
    }

    pub fn policy_count(&self) -> u64 {
        (self.branching as u64).saturating_pow(self.depth as u32)
    }
}
