//! Action-tree sampling.
//!
//! Every node draws `branching` actions. Accelerations come from stratified
//! quantiles of a triangular distribution on `[accel_min, accel_max]` with its
//! mode at the comfort value; each action also picks a lateral target (keep,
//! left or right lane) that a lookahead steering law converts into a constant
//! curvature rate. The lowest acceleration stratum always keeps its lane so
//! that a straight braking branch exists; while an active stop line lies
//! ahead, that branch brakes to rest in the middle of the stop window instead.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::features::path_integral_features;
use super::integrate::integrate_with_substep;
use super::{ControlAction, PlannerConfig, PlanningContext, Policy, PolicySet};
use crate::error::{Error, Result};
use crate::world::{LaneId, RoadNetwork, VehicleState, STOP_SPEED, STOP_WINDOW};

/// Inverse CDF of the triangular distribution on `[lo, hi]` with mode `mode`.
pub fn triangular_quantile(u: f64, lo: f64, mode: f64, hi: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    let split = (mode - lo) / (hi - lo);
    if u < split {
        lo + (u * (hi - lo) * (mode - lo)).sqrt()
    } else {
        hi - ((1.0 - u) * (hi - lo) * (hi - mode)).sqrt()
    }
}

/// Curvature rate that steers from `state` toward the center of `target` lane
/// by the end of `duration`.
fn steering_rate(
    net: &RoadNetwork,
    state: &VehicleState,
    target: LaneId,
    config: &PlannerConfig,
) -> f64 {
    let reference = &net.lane(net.reference_lane).centerline;
    let pr = reference.project(state.position());
    let d = pr.lateral;
    let lane_kappa = pr.curvature / (1.0 - pr.curvature * d);
    let heading_err = crate::world::wrap_angle(state.yaw - pr.heading);
    let lookahead = (state.v * config.lookahead_time).max(config.lookahead_min);
    let d_target = net.lane_center_offset(target);
    let kappa_des = (lane_kappa
        + 2.0 * (d_target - d - lookahead * heading_err.sin()) / (lookahead * lookahead))
        .clamp(-config.curvature_max, config.curvature_max);
    ((kappa_des - state.curvature) / config.action_duration)
        .clamp(-config.curvature_rate_max, config.curvature_rate_max)
}

fn lateral_pattern(branching: usize) -> Vec<i32> {
    // Slot 0 (lowest acceleration stratum) always keeps the lane.
    let cycle = [-1, 1, 0];
    std::iter::once(0)
        .chain((0..branching.saturating_sub(1)).map(|i| cycle[i % 3]))
        .collect()
}

struct Node {
    state: VehicleState,
    target: LaneId,
    actions: Vec<ControlAction>,
    states: Vec<VehicleState>,
    /// Stop lines not yet served along this branch.
    stops: Vec<bool>,
}

/// Deceleration that brings `state` to rest in the middle of the window of the
/// nearest stop line still active on the branch, if one lies ahead.
fn stop_accel(
    ctx: &PlanningContext,
    state: &VehicleState,
    stops: &[bool],
    config: &PlannerConfig,
) -> Option<f64> {
    let travelled = ctx.station_delta(ctx.network.road_frame(state.x, state.y).0);
    let ahead = ctx
        .stop_ahead
        .iter()
        .zip(stops)
        .filter(|&(_, &active)| active)
        .map(|(&d, _)| d - travelled - STOP_WINDOW / 2.0)
        .filter(|&a| a > 0.0)
        .min_by(f64::total_cmp)?;
    let reach = state.v * config.action_duration * config.depth as f64;
    (ahead <= reach).then(|| (-state.v * state.v / (2.0 * ahead)).max(config.accel_min))
}

/// Clears the stop lines served (speed below the stop speed inside the window)
/// by `states`.
fn serve_stops(ctx: &PlanningContext, states: &[VehicleState], stops: &mut [bool]) {
    for s in states {
        let travelled = ctx.station_delta(ctx.network.road_frame(s.x, s.y).0);
        for (active, &d) in stops.iter_mut().zip(&ctx.stop_ahead) {
            if *active && (0.0..=STOP_WINDOW).contains(&(d - travelled)) && s.v < STOP_SPEED {
                *active = false;
            }
        }
    }
}

/// Samples the action tree and returns one policy per root-to-leaf path
/// (`branching^depth` policies, unsorted). Deterministic given `seed`.
pub fn sample_policy_set(
    ctx: &PlanningContext,
    config: &PlannerConfig,
    cycle: u64,
    seed: u64,
) -> Result<PolicySet> {
    config.validate()?;
    let count = config.policy_count();
    if count > config.max_policies {
        return Err(Error::Capacity {
            requested: count,
            cap: config.max_policies,
        });
    }
    let net = ctx.network;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let steps = config.steps_per_action();
    let lanes = &net.main_lanes;
    let ego = ctx.ego;
    let (_, lat0) = net.road_frame(ego.x, ego.y);
    let root_lane = net.main_lane_at(lat0);

    let stops = vec![true; ctx.stop_ahead.len()];
    let mut frontier = vec![Node {
        state: ego,
        target: root_lane,
        actions: Vec::new(),
        states: vec![ego],
        stops,
    }];
    let pattern = lateral_pattern(config.branching);
    for _ in 0..config.depth {
        let mut next = Vec::with_capacity(frontier.len() * config.branching);
        for node in &frontier {
            let mut slots: Vec<i32> = pattern[1..].to_vec();
            slots.shuffle(&mut rng);
            slots.insert(0, pattern[0]);
            let pos = lanes.iter().position(|&l| l == node.target).unwrap_or(0) as i32;
            for (stratum, &shift) in slots.iter().enumerate() {
                let u = (stratum as f64 + rng.random::<f64>()) / config.branching as f64;
                let mut accel = triangular_quantile(
                    u,
                    config.accel_min,
                    config.accel_comfort,
                    config.accel_max,
                );
                if stratum == 0 {
                    accel = stop_accel(ctx, &node.state, &node.stops, config).unwrap_or(accel);
                }
                let target = lanes[(pos + shift).clamp(0, lanes.len() as i32 - 1) as usize];
                let curvature_rate = steering_rate(net, &node.state, target, config);
                let action = ControlAction {
                    accel,
                    curvature_rate,
                    duration: config.action_duration,
                };
                let mut states = node.states.clone();
                let mut s = node.state;
                for _ in 0..steps {
                    s = integrate_with_substep(&s, &action, config.state_dt, config.substep);
                    states.push(s);
                }
                let mut stops = node.stops.clone();
                serve_stops(ctx, &states[states.len() - steps..], &mut stops);
                let mut actions = node.actions.clone();
                actions.push(action);
                next.push(Node {
                    state: s,
                    target,
                    actions,
                    states,
                    stops,
                });
            }
        }
        frontier = next;
    }

    let build = |node: Node| {
        let (features, control_points, waypoints) =
            path_integral_features(&node.states, &node.actions, ctx, config);
        Policy {
            actions: node.actions,
            states: node.states,
            features,
            control_points,
            waypoints,
            value: 0.0,
        }
    };
    #[cfg(feature = "parallel")]
    let policies: Vec<Policy> = {
        use rayon::prelude::*;
        frontier.into_par_iter().map(build).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let policies: Vec<Policy> = frontier.into_iter().map(build).collect();

    Ok(PolicySet {
        cycle,
        ego,
        policies,
        sorted: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triangular_quantile_endpoints_and_mode() {
        assert!((triangular_quantile(0.0, -5.0, 0.0, 2.5) + 5.0).abs() < 1e-12);
        assert!((triangular_quantile(1.0, -5.0, 0.0, 2.5) - 2.5).abs() < 1e-12);
        let split = 5.0 / 7.5;
        assert!(triangular_quantile(split, -5.0, 0.0, 2.5).abs() < 1e-12);
    }

    #[test]
    fn pattern_keeps_lane_in_first_slot() {
        assert_eq!(lateral_pattern(4), vec![0, -1, 1, 0]);
        assert_eq!(lateral_pattern(1), vec![0]);
    }
}
