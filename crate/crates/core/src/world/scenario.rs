//! Scenario description, traffic and vehicle states.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::geometry::Point;
use super::network::{LaneId, LaneKind, LanePosition, OvalGeometry, RoadNetwork};
use crate::error::{Error, Result};

pub const KPH: f64 = 1.0 / 3.6;
pub const MAX_VEHICLES: usize = 15;
pub const MIN_SPAWN_DISTANCE: f64 = 200.0;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VehicleState {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    /// Normalized to (-pi, pi].
    pub yaw: f64,
    pub v: f64,
    pub curvature: f64,
    pub accel: f64,
}

impl VehicleState {
    pub fn position(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrafficVehicle {
    pub lane: LaneId,
    /// Arc length at t = 0.
    pub arc: f64,
    pub speed: f64,
    pub length: f64,
    pub width: f64,
}

/// One predicted object pose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictedPose {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
    pub t: f64,
}

impl TrafficVehicle {
    /// Arc position at absolute time `t` (constant velocity, wrapping on loops).
    pub fn arc_at(&self, network: &RoadNetwork, t: f64) -> f64 {
        network
            .lane(self.lane)
            .centerline
            .normalize_arc(self.arc + self.speed * t)
    }

    pub fn pose_at(&self, network: &RoadNetwork, t: f64) -> PredictedPose {
        let (p, yaw, _) = network
            .lane(self.lane)
            .centerline
            .pose_at(self.arc_at(network, t));
        PredictedPose {
            x: p.x,
            y: p.y,
            yaw,
            t,
        }
    }

    pub fn footprint_at(&self, network: &RoadNetwork, t: f64) -> Footprint {
        let p = self.pose_at(network, t);
        Footprint {
            x: p.x,
            y: p.y,
            yaw: p.yaw,
            length: self.length,
            width: self.width,
        }
    }
}

/// Constant-velocity prediction along the vehicle's lane, starting at absolute
/// time `t0`. Returns `floor(horizon/dt)+1` poses with times relative to `t0`.
pub fn predict_object(
    network: &RoadNetwork,
    vehicle: &TrafficVehicle,
    t0: f64,
    horizon: f64,
    dt: f64,
) -> Vec<PredictedPose> {
    assert!(horizon > 0.0 && dt > 0.0, "horizon and dt must be positive");
    let n = (horizon / dt + 1e-9).floor() as usize;
    (0..=n)
        .map(|k| {
            let rel = k as f64 * dt;
            let mut p = vehicle.pose_at(network, t0 + rel);
            p.t = rel;
            p
        })
        .collect()
}

/// Oriented rectangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Footprint {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
    pub length: f64,
    pub width: f64,
}

impl Footprint {
    pub fn inflated(self, margin: f64) -> Self {
        Self {
            length: self.length + 2.0 * margin,
            width: self.width + 2.0 * margin,
            ..self
        }
    }

    fn corners(&self) -> [Point; 4] {
        let (c, s) = (self.yaw.cos(), self.yaw.sin());
        let (hl, hw) = (self.length / 2.0, self.width / 2.0);
        [(hl, hw), (hl, -hw), (-hl, -hw), (-hl, hw)]
            .map(|(a, b)| Point::new(self.x + a * c - b * s, self.y + a * s + b * c))
    }

    /// Separating-axis overlap test.
    pub fn overlaps(&self, other: &Footprint) -> bool {
        let (ca, cb) = (self.corners(), other.corners());
        for yaw in [
            self.yaw,
            self.yaw + std::f64::consts::FRAC_PI_2,
            other.yaw,
            other.yaw + std::f64::consts::FRAC_PI_2,
        ] {
            let (ax, ay) = (yaw.cos(), yaw.sin());
            let proj = |pts: &[Point; 4]| {
                pts.iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                        let d = p.x * ax + p.y * ay;
                        (lo.min(d), hi.max(d))
                    })
            };
            let (a0, a1) = proj(&ca);
            let (b0, b1) = proj(&cb);
            if a1 < b0 || b1 < a0 {
                return false;
            }
        }
        true
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointSpec {
    pub lane: LaneId,
    /// Station along the reference lane.
    pub station: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StopLineSpec {
    pub station: f64,
    #[serde(default = "default_true")]
    pub active: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EgoSpec {
    pub lane: LaneId,
    pub station: f64,
    pub speed: f64,
}

impl Default for EgoSpec {
    fn default() -> Self {
        Self {
            lane: 1,
            station: 0.0,
            speed: 10.0,
        }
    }
}

/// Scenario section of the configuration document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub vehicle_count: usize,
    pub target_speed_kph: f64,
    pub spawn_speed_kph: (f64, f64),
    pub vehicle_length: f64,
    pub vehicle_width: f64,
    pub geometry: OvalGeometry,
    pub ego: EgoSpec,
    pub checkpoints: Vec<CheckpointSpec>,
    pub stop_lines: Vec<StopLineSpec>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            vehicle_count: 3,
            target_speed_kph: 70.0,
            spawn_speed_kph: (25.0, 35.0),
            vehicle_length: 4.5,
            vehicle_width: 1.8,
            geometry: OvalGeometry::default(),
            ego: EgoSpec::default(),
            checkpoints: vec![
                CheckpointSpec {
                    lane: 0,
                    station: 250.0,
                },
                CheckpointSpec {
                    lane: 2,
                    station: 420.0,
                },
                CheckpointSpec {
                    lane: 0,
                    station: 700.0,
                },
                CheckpointSpec {
                    lane: 2,
                    station: 870.0,
                },
            ],
            stop_lines: vec![
                StopLineSpec {
                    station: 120.0,
                    active: true,
                },
                StopLineSpec {
                    station: 560.0,
                    active: true,
                },
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub lane: LaneId,
    pub arc: f64,
    pub station: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StopLine {
    pub station: f64,
    pub active: bool,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub network: RoadNetwork,
    pub checkpoints: Vec<Checkpoint>,
    pub stop_lines: Vec<StopLine>,
    pub vehicles: Vec<TrafficVehicle>,
    pub ego_start: VehicleState,
    pub ego_length: f64,
    pub ego_width: f64,
    /// m/s
    pub target_speed: f64,
    pub rng_seed: u64,
}

impl Scenario {
    pub fn build(config: &ScenarioConfig) -> Result<Self> {
        let network = RoadNetwork::oval(&config.geometry)?;
        let inner = network.main_lanes[0];
        let outer = *network.main_lanes.last().unwrap();
        if config.checkpoints.is_empty() {
            return Err(Error::invalid(
                "scenario",
                "at least one checkpoint required",
            ));
        }
        for (i, cp) in config.checkpoints.iter().enumerate() {
            let expected = if i % 2 == 0 {
                config.checkpoints[0].lane
            } else {
                other(config.checkpoints[0].lane, inner, outer)
            };
            if cp.lane != expected || (cp.lane != inner && cp.lane != outer) {
                return Err(Error::invalid(
                    "scenario",
                    "checkpoints must alternate between inner and outer lanes",
                ));
            }
        }
        if config.vehicle_count > MAX_VEHICLES {
            return Err(Error::invalid(
                "scenario",
                format!("at most {MAX_VEHICLES} vehicles"),
            ));
        }
        if !network.main_lanes.contains(&config.ego.lane) {
            return Err(Error::invalid("scenario", "ego must start on a main lane"));
        }
        let checkpoints = config
            .checkpoints
            .iter()
            .map(|c| Checkpoint {
                lane: c.lane,
                arc: network.arc_at_station(c.lane, c.station),
                station: c.station,
            })
            .collect();
        let stop_lines = config
            .stop_lines
            .iter()
            .map(|s| StopLine {
                station: s.station,
                active: s.active,
            })
            .collect();

        let ego_arc = network.arc_at_station(config.ego.lane, config.ego.station);
        let (p, yaw, kappa) = network.lane(config.ego.lane).centerline.pose_at(ego_arc);
        let ego_start = VehicleState {
            t: 0.0,
            x: p.x,
            y: p.y,
            yaw,
            v: config.ego.speed,
            curvature: kappa,
            accel: 0.0,
        };

        let vehicles = spawn_vehicles(&network, config, ego_start.position())?;
        Ok(Self {
            network,
            checkpoints,
            stop_lines,
            vehicles,
            ego_start,
            ego_length: config.vehicle_length,
            ego_width: config.vehicle_width,
            target_speed: config.target_speed_kph * KPH,
            rng_seed: config.seed,
        })
    }

    pub fn ego_footprint(&self, s: &VehicleState) -> Footprint {
        Footprint {
            x: s.x,
            y: s.y,
            yaw: s.yaw,
            length: self.ego_length,
            width: self.ego_width,
        }
    }
}

fn other(lane: LaneId, inner: LaneId, outer: LaneId) -> LaneId {
    if lane == inner {
        outer
    } else {
        inner
    }
}

fn spawn_vehicles(
    network: &RoadNetwork,
    config: &ScenarioConfig,
    ego: Point,
) -> Result<Vec<TrafficVehicle>> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_7aff_1c00_0000);
    let mut vehicles: Vec<TrafficVehicle> = Vec::new();
    let (lo, hi) = config.spawn_speed_kph;
    let mut attempts = 0;
    while vehicles.len() < config.vehicle_count {
        attempts += 1;
        if attempts > 10_000 {
            return Err(Error::invalid(
                "scenario",
                "could not place traffic vehicles",
            ));
        }
        let lane = network.main_lanes[rng.random_range(0..network.main_lanes.len())];
        let line = &network.lane(lane).centerline;
        let arc = rng.random_range(0.0..line.length());
        let speed = rng.random_range(lo..=hi) * KPH;
        if line.point_at(arc).dist(ego) < MIN_SPAWN_DISTANCE {
            continue;
        }
        let clear = vehicles.iter().all(|v| {
            v.lane != lane || {
                let d = line.ahead(v.arc, arc).unwrap();
                d.min(line.length() - d) > 4.0 * config.vehicle_length
            }
        });
        if clear {
            vehicles.push(TrafficVehicle {
                lane,
                arc,
                speed,
                length: config.vehicle_length,
                width: config.vehicle_width,
            });
        }
    }
    Ok(vehicles)
}

/// Events produced while advancing the world.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepEvents {
    pub checkpoints_hit: Vec<usize>,
    pub checkpoints_missed: Vec<usize>,
    pub stops_satisfied: Vec<usize>,
    pub stop_violations: Vec<usize>,
    pub collisions: usize,
}

/// Stop-line satisfaction window in front of the line.
pub const STOP_WINDOW: f64 = 2.0;
pub const STOP_SPEED: f64 = 0.3;

/// Mutable simulation state: time, stop-line flags and mission progress.
#[derive(Debug, Clone)]
pub struct World {
    pub scenario: Scenario,
    pub time: f64,
    pub ego: VehicleState,
    pub stop_active: Vec<bool>,
    pub next_checkpoint: usize,
    pub checkpoint_hits: Vec<bool>,
    pub checkpoints_passed: usize,
    pub stops_satisfied: Vec<bool>,
    pub stop_violations: usize,
    pub collisions: usize,
    /// Unwrapped station travelled since the start.
    pub distance_travelled: f64,
    station: f64,
}

impl World {
    pub fn new(scenario: Scenario) -> Self {
        let ego = scenario.ego_start;
        let (station, _) = scenario.network.road_frame(ego.x, ego.y);
        let n_cp = scenario.checkpoints.len();
        let n_stop = scenario.stop_lines.len();
        // First checkpoint ahead of the start.
        let line = &scenario
            .network
            .lane(scenario.network.reference_lane)
            .centerline;
        let next_checkpoint = (0..n_cp)
            .min_by(|&a, &b| {
                let da = line
                    .ahead(station, scenario.checkpoints[a].station)
                    .unwrap();
                let db = line
                    .ahead(station, scenario.checkpoints[b].station)
                    .unwrap();
                da.total_cmp(&db)
            })
            .unwrap_or(0);
        Self {
            stop_active: scenario.stop_lines.iter().map(|s| s.active).collect(),
            time: 0.0,
            ego,
            next_checkpoint,
            checkpoint_hits: vec![false; n_cp],
            checkpoints_passed: 0,
            stops_satisfied: vec![false; n_stop],
            stop_violations: 0,
            collisions: 0,
            distance_travelled: 0.0,
            station,
            scenario,
        }
    }

    pub fn network(&self) -> &RoadNetwork {
        &self.scenario.network
    }

    pub fn station(&self) -> f64 {
        self.station
    }

    pub fn lap_length(&self) -> f64 {
        self.scenario.network.station_length()
    }

    /// Goal of the route-progress computation: the next checkpoint.
    pub fn goal(&self) -> LanePosition {
        let cp = &self.scenario.checkpoints[self.next_checkpoint];
        LanePosition {
            lane: cp.lane,
            arc: cp.arc,
        }
    }

    pub fn active_stop_stations(&self) -> Vec<f64> {
        self.scenario
            .stop_lines
            .iter()
            .zip(&self.stop_active)
            .filter(|(_, a)| **a)
            .map(|(s, _)| s.station)
            .collect()
    }

    /// Advances through executed states (each with absolute time), updating
    /// mission bookkeeping.
    pub fn advance(&mut self, states: &[VehicleState]) -> StepEvents {
        let mut ev = StepEvents::default();
        let lap = self.lap_length();
        for s in states {
            let (station, lateral) = self.scenario.network.road_frame(s.x, s.y);
            let mut delta = station - self.station;
            if delta > lap / 2.0 {
                delta -= lap;
            } else if delta < -lap / 2.0 {
                delta += lap;
            }
            let prev = self.station;
            self.distance_travelled += delta;
            self.station = station;

            // Line in [prev, current): standing exactly on it is not a crossing.
            let crossed = |line_station: f64| -> bool {
                let before = (line_station - prev).rem_euclid(lap);
                delta > 0.0 && before < delta
            };

            for i in 0..self.scenario.stop_lines.len() {
                let ls = self.scenario.stop_lines[i].station;
                let ahead = (ls - station).rem_euclid(lap);
                if self.stop_active[i] {
                    if crossed(ls) {
                        self.stop_violations += 1;
                        ev.stop_violations.push(i);
                        self.stop_active[i] = false;
                    } else if ahead <= STOP_WINDOW && s.v < STOP_SPEED {
                        self.stop_active[i] = false;
                        self.stops_satisfied[i] = true;
                        ev.stops_satisfied.push(i);
                    }
                } else if ahead >= lap / 4.0
                    && ahead <= lap / 2.0
                    && self.scenario.stop_lines[i].active
                {
                    self.stop_active[i] = true;
                }
            }

            let cp_idx = self.next_checkpoint;
            let cp = &self.scenario.checkpoints[cp_idx];
            if crossed(cp.station) {
                let lane = self.scenario.network.main_lane_at(lateral);
                if lane == cp.lane {
                    self.checkpoint_hits[cp_idx] = true;
                    ev.checkpoints_hit.push(cp_idx);
                } else {
                    ev.checkpoints_missed.push(cp_idx);
                }
                self.checkpoints_passed += 1;
                self.next_checkpoint = (cp_idx + 1) % self.scenario.checkpoints.len();
            }

            let ego_fp = self.scenario.ego_footprint(s);
            let hit = self.scenario.vehicles.iter().any(|v| {
                v.footprint_at(&self.scenario.network, s.t)
                    .overlaps(&ego_fp)
            });
            if hit {
                self.collisions += 1;
                ev.collisions += 1;
            }
            self.ego = *s;
            self.time = s.t;
        }
        ev
    }

    /// Whether the ego completed a full lap hitting every checkpoint and
    /// satisfying every stop line.
    pub fn lap_complete(&self) -> bool {
        self.distance_travelled >= self.lap_length()
            && self.checkpoint_hits.iter().all(|h| *h)
            && self.stops_satisfied.iter().all(|s| *s)
    }

    /// Exit-lane or off-network check for the current ego.
    pub fn ego_off_route(&self) -> bool {
        let m = self
            .scenario
            .network
            .lane_query(self.ego.x, self.ego.y, self.ego.yaw);
        !m.on_network || self.scenario.network.lane(m.lane).kind == LaneKind::Exit
    }
}
