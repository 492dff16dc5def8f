use super::PlannerConfig;
use crate::error::Result;
use crate::world::{
    predict_object, LaneKind, LanePosition, PredictedPose, RoadNetwork, RouteField, TrafficVehicle,
    VehicleState, World,
};

/// Read-only snapshot of the environment for one planning cycle.
#[derive(Debug, Clone)]
pub struct PlanningContext<'a> {
    pub network: &'a RoadNetwork,
    pub ego: VehicleState,
    pub target_speed: f64,
    pub start_station: f64,
    pub start_lateral: f64,
    pub lap: f64,
    /// Next checkpoint and the one after it.
    pub goal: LanePosition,
    pub goal_ahead: f64,
    pub goal_lateral: f64,
    route: RouteField,
    next_route: RouteField,
    start_remaining: f64,
    goal_to_next: f64,
    /// Distances ahead of the ego start station to active stop lines.
    pub stop_ahead: Vec<f64>,
    pub vehicles: Vec<TrafficVehicle>,
    /// Predicted poses per vehicle, at `state_dt` spacing over the horizon.
    pub predictions: Vec<Vec<PredictedPose>>,
}

impl<'a> PlanningContext<'a> {
    pub fn from_world(world: &'a World, config: &PlannerConfig) -> Result<Self> {
        let sc = &world.scenario;
        let n_cp = sc.checkpoints.len();
        let cp = &sc.checkpoints[world.next_checkpoint];
        let cp2 = &sc.checkpoints[(world.next_checkpoint + 1) % n_cp];
        let predictions = sc
            .vehicles
            .iter()
            .map(|v| predict_object(&sc.network, v, world.ego.t, config.horizon, config.state_dt))
            .collect();
        Self::new(
            &sc.network,
            world.ego,
            sc.target_speed,
            LanePosition {
                lane: cp.lane,
                arc: cp.arc,
            },
            LanePosition {
                lane: cp2.lane,
                arc: cp2.arc,
            },
            &world.active_stop_stations(),
            sc.vehicles.clone(),
            predictions,
        )
    }

    #[allow(clippy::too_many_arguments)]
    pub fn new(
        network: &'a RoadNetwork,
        ego: VehicleState,
        target_speed: f64,
        goal: LanePosition,
        next_goal: LanePosition,
        stop_stations: &[f64],
        vehicles: Vec<TrafficVehicle>,
        predictions: Vec<Vec<PredictedPose>>,
    ) -> Result<Self> {
        let lap = network.station_length();
        let (start_station, start_lateral) = network.road_frame(ego.x, ego.y);
        let route = network.route_field(goal)?;
        let next_route = network.route_field(next_goal)?;
        let goal_point = network.lane(goal.lane).centerline.point_at(goal.arc);
        let (goal_station, goal_lateral) = network.road_frame(goal_point.x, goal_point.y);
        let goal_to_next = network.remaining(&next_route, goal)?;
        let m = network.lane_query(ego.x, ego.y, ego.yaw);
        let start_remaining = network
            .remaining(
                &route,
                LanePosition {
                    lane: m.lane,
                    arc: m.arc,
                },
            )
            .unwrap_or_else(|_| {
                // Off the main loop: measure from the nearest main lane instead.
                let lane = network.main_lane_at(start_lateral);
                let arc = network.arc_at_station(lane, start_station);
                network
                    .remaining(&route, LanePosition { lane, arc })
                    .unwrap_or(0.0)
            });
        let stop_ahead = stop_stations
            .iter()
            .map(|s| (s - start_station).rem_euclid(lap))
            .collect();
        Ok(Self {
            network,
            ego,
            target_speed,
            start_station,
            start_lateral,
            lap,
            goal,
            goal_ahead: (goal_station - start_station).rem_euclid(lap),
            goal_lateral,
            route,
            next_route,
            start_remaining,
            goal_to_next,
            stop_ahead,
            vehicles,
            predictions,
        })
    }

    /// Signed station travelled from the ego start, wrapped to (-lap/2, lap/2].
    pub fn station_delta(&self, station: f64) -> f64 {
        let mut d = (station - self.start_station).rem_euclid(self.lap);
        if d > self.lap / 2.0 {
            d -= self.lap;
        }
        d
    }

    /// Route progress from the ego start; `None` when the position has no route
    /// (exit lanes).
    pub fn progress(&self, lane: usize, arc: f64, station_delta: f64) -> Option<f64> {
        if self.network.lane(lane).kind == LaneKind::Exit {
            return None;
        }
        let pos = LanePosition { lane, arc };
        if station_delta < self.goal_ahead {
            let r = self.network.remaining(&self.route, pos).ok()?;
            // A position just behind the start would otherwise read as a full lap.
            let p = self.start_remaining - r;
            Some(if p < -self.lap / 2.0 { p + self.lap } else { p })
        } else {
            let r = self.network.remaining(&self.next_route, pos).ok()?;
            Some(self.start_remaining + self.goal_to_next - r)
        }
    }
}
