//! Per-step reward features and their discounted path integrals.

use serde::{Deserialize, Serialize};

use super::{feature, ControlAction, ControlPoint, PlannerConfig, PlanningContext, Waypoint, K};
use crate::world::{wrap_angle, LaneKind, VehicleState, STOP_SPEED, STOP_WINDOW};

/// Saturation constants; each per-step feature is scaled into [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureScales {
    pub heading: f64,
    pub accel: f64,
    pub jerk: f64,
    pub lateral_accel: f64,
    pub lateral_jerk: f64,
    pub curvature: f64,
    pub lateral_speed: f64,
    /// Longitudinal and lateral padding of the proximity ellipse around objects.
    pub proximity_long: f64,
    pub proximity_lat: f64,
    pub proximity_power: f64,
    pub corridor_distance: f64,
}

impl Default for FeatureScales {
    fn default() -> Self {
        Self {
            heading: 0.5,
            accel: 5.0,
            jerk: 4.0,
            lateral_accel: 4.0,
            lateral_jerk: 4.0,
            curvature: 0.1,
            lateral_speed: 2.0,
            proximity_long: 4.0,
            proximity_lat: 0.6,
            proximity_power: 4.0,
            corridor_distance: 200.0,
        }
    }
}

/// Discounted left-Riemann path integral of per-step values sampled every `dt`
/// seconds: `sum_k gamma^(k dt) f_k dt`.
pub fn integrate_path(values: &[f64], dt: f64, gamma: f64) -> f64 {
    values
        .iter()
        .enumerate()
        .map(|(k, f)| gamma.powf(k as f64 * dt) * f * dt)
        .sum()
}

struct StepGeometry {
    lane_lateral: f64,
    heading_dev: f64,
    off_road: bool,
    station_delta: f64,
    road_lateral: f64,
    progress: Option<f64>,
}

fn geometry(ctx: &PlanningContext, s: &VehicleState) -> StepGeometry {
    let net = ctx.network;
    let m = net.lane_query(s.x, s.y, s.yaw);
    let (station, road_lateral) = net.road_frame(s.x, s.y);
    let station_delta = ctx.station_delta(station);
    let exit = net.lane(m.lane).kind == LaneKind::Exit;
    StepGeometry {
        lane_lateral: m.lateral,
        heading_dev: m.heading_deviation,
        off_road: !m.on_network || exit,
        station_delta,
        road_lateral,
        progress: ctx.progress(m.lane, m.arc, station_delta),
    }
}

/// Per-step feature values (each in [0, 1]) for every state except the last,
/// plus the policy's control points.
pub fn step_features(
    states: &[VehicleState],
    actions: &[ControlAction],
    ctx: &PlanningContext,
    config: &PlannerConfig,
) -> (Vec<[f64; K]>, Vec<ControlPoint>) {
    let sc = &config.scales;
    let net = ctx.network;
    let n = states.len().saturating_sub(1);
    let horizon = config.horizon;
    let dt = config.state_dt;
    let per_action = config.steps_per_action();
    let progress_scale = (ctx.target_speed * horizon).max(1.0);
    let geo: Vec<StepGeometry> = states.iter().map(|s| geometry(ctx, s)).collect();

    // Final lane decides the lane-change target for the overshoot feature.
    let last = geo.last().expect("policy has states");
    let final_lane = net.main_lane_at(last.road_lateral);
    let start_lane = net.main_lane_at(ctx.start_lateral);
    let final_center = net.lane_center_offset(final_lane);
    let half_width = net.lane(final_lane).width / 2.0;
    let cp_lateral = ctx.goal_lateral;

    // A stop line stays active along the policy until it stops in front of it.
    let mut stop_active: Vec<bool> = vec![true; ctx.stop_ahead.len()];
    let mut crossing: Option<f64> = None;

    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let s = &states[k];
        let g = &geo[k];
        let t = k as f64 * dt;
        let ai = (k / per_action).min(actions.len() - 1);
        let act = &actions[ai];
        let prev_accel = if ai == 0 {
            ctx.ego.accel
        } else {
            actions[ai - 1].accel
        };
        let mut f = [0.0; K];

        f[feature::LATERAL_OFFSET] = if g.off_road {
            1.0
        } else {
            (g.lane_lateral.abs() / half_width).min(1.0)
        };
        f[feature::HEADING_DEVIATION] = (g.heading_dev.abs() / sc.heading).min(1.0);
        f[feature::OFF_ROAD] = if g.off_road { 1.0 } else { 0.0 };
        let eff_accel = if s.v <= 0.0 && act.accel < 0.0 {
            0.0
        } else {
            act.accel
        };
        f[feature::ACCELERATION] = (eff_accel.abs() / sc.accel).min(1.0);
        f[feature::JERK] = ((act.accel - prev_accel).abs() / act.duration / sc.jerk).min(1.0);
        f[feature::LATERAL_ACCELERATION] =
            (s.v * s.v * s.curvature.abs() / sc.lateral_accel).min(1.0);
        let lat_jerk = 2.0 * s.v * eff_accel * s.curvature + s.v * s.v * act.curvature_rate;
        f[feature::LATERAL_JERK] = (lat_jerk.abs() / sc.lateral_jerk).min(1.0);
        f[feature::CURVATURE] = (s.curvature.abs() / sc.curvature).min(1.0);
        f[feature::SPEED_DEVIATION] = ((s.v - ctx.target_speed).abs() / ctx.target_speed).min(1.0);
        f[feature::PROGRESS] = match g.progress {
            Some(p) => 1.0 - (p / progress_scale).clamp(0.0, 1.0),
            None => 1.0,
        };
        let lat_speed = (geo[k + 1].road_lateral - g.road_lateral) / dt;
        f[feature::LANE_CHANGE_DELAY] =
            (lat_speed.abs() / sc.lateral_speed * (t / horizon)).min(1.0);
        if final_lane != start_lane {
            let dir = (final_center - ctx.start_lateral).signum();
            f[feature::LATERAL_OVERSHOOT] =
                ((dir * (g.road_lateral - final_center)).max(0.0) / half_width).min(1.0);
        }
        let mut prox: f64 = 0.0;
        for (veh, pred) in ctx.vehicles.iter().zip(&ctx.predictions) {
            let p = &pred[k.min(pred.len() - 1)];
            let (c, sn) = (p.yaw.cos(), p.yaw.sin());
            let (dx, dy) = (s.x - p.x, s.y - p.y);
            let lon = (dx * c + dy * sn) / (veh.length + sc.proximity_long);
            let lat = (-dx * sn + dy * c) / (veh.width + sc.proximity_lat);
            let r2 = lon * lon + lat * lat;
            prox = prox.max((1.0 / r2.powf(sc.proximity_power / 2.0)).min(1.0));
        }
        f[feature::PROXIMITY] = prox;
        for (active, &d) in stop_active.iter_mut().zip(&ctx.stop_ahead) {
            let ahead = d - g.station_delta;
            if *active && (0.0..=STOP_WINDOW).contains(&ahead) && s.v < STOP_SPEED {
                *active = false;
            }
            if *active && ahead < 0.0 {
                f[feature::STOP_VIOLATION] = 1.0;
            }
        }
        let to_goal = ctx.goal_ahead - g.station_delta;
        let deviation = ((g.road_lateral - cp_lateral).abs() / (2.0 * half_width)).min(1.0);
        if (0.0..=sc.corridor_distance).contains(&to_goal) {
            f[feature::CHECKPOINT_CORRIDOR] = deviation;
        } else if to_goal < 0.0 {
            // Past the checkpoint the deviation at the crossing persists.
            let at_crossing = *crossing.get_or_insert(deviation);
            f[feature::CHECKPOINT_CORRIDOR] = at_crossing;
        }
        out.push(f);
    }

    let cps = config
        .control_point_indices()
        .into_iter()
        .map(|i| {
            let s = &states[i];
            ControlPoint {
                lateral: geo[i].road_lateral - ctx.start_lateral,
                yaw: wrap_angle(s.yaw - ctx.ego.yaw),
                progress: geo[i].progress.unwrap_or(-progress_scale),
            }
        })
        .collect();
    (out, cps)
}

/// Path-integral feature vector, control points and waypoints of a policy.
pub fn path_integral_features(
    states: &[VehicleState],
    actions: &[ControlAction],
    ctx: &PlanningContext,
    config: &PlannerConfig,
) -> (Vec<f64>, Vec<ControlPoint>, Vec<Waypoint>) {
    let (steps, cps) = step_features(states, actions, ctx, config);
    let features = (0..K)
        .map(|i| {
            let column: Vec<f64> = steps.iter().map(|f| f[i]).collect();
            integrate_path(&column, config.state_dt, config.gamma)
        })
        .collect();
    let waypoints = config
        .control_point_indices()
        .into_iter()
        .map(|i| Waypoint::from(&states[i]))
        .collect();
    (features, cps, waypoints)
}
