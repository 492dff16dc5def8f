//! Browser demo of the planner.
//!
//! [`Session`] holds a simulated scenario and exposes three operations:
//! sampling the current cycle's policy set, re-weighting that set under new
//! reward weights, and driving a number of cycles. [`WebSession`] wraps it for
//! JavaScript and exchanges JSON strings.

use pirl_core::irl::policy_distribution;
use pirl_core::planner::{
    default_expert_theta, evaluate, Mpc, PlannerConfig, PolicySet, RewardWeights, Selection,
    FEATURE_NAMES, K,
};
use pirl_core::world::{Scenario, ScenarioConfig, World};
use pirl_core::Result;
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

/// Static scene geometry for drawing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scene {
    pub lanes: Vec<Vec<Point>>,
    pub lane_width: f64,
    pub checkpoints: Vec<Point>,
    pub stop_lines: Vec<Point>,
    pub features: Vec<String>,
    pub theta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Vehicle {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
}

/// Dynamic state after the last operation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Status {
    pub cycle: u64,
    pub time: f64,
    pub ego: Vehicle,
    pub speed: f64,
    pub traffic: Vec<Vehicle>,
    pub trail: Vec<Point>,
    pub checkpoint_hits: Vec<bool>,
    pub stops_satisfied: Vec<bool>,
    pub stop_violations: usize,
    pub collisions: usize,
    pub lap_complete: bool,
}

/// A sampled policy set evaluated under the session's weights.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sampled {
    pub paths: Vec<Vec<Point>>,
    pub probabilities: Vec<f64>,
    pub optimal: usize,
}

pub struct Session {
    world: World,
    mpc: Mpc,
    theta: Vec<f64>,
    set: Option<PolicySet>,
    trail: Vec<Point>,
}

impl Session {
    pub fn new(seed: u64) -> Result<Self> {
        let world = World::new(Scenario::build(&ScenarioConfig {
            seed,
            ..Default::default()
        })?);
        let mpc = Mpc::new(PlannerConfig {
            seed,
            ..Default::default()
        })?;
        let e = world.ego;
        Ok(Self {
            world,
            mpc,
            theta: default_expert_theta(),
            set: None,
            trail: vec![Point { x: e.x, y: e.y }],
        })
    }

    pub fn scene(&self) -> Scene {
        let s = &self.world.scenario;
        let net = &s.network;
        let lanes = net
            .main_lanes
            .iter()
            .map(|&l| {
                net.lane(l)
                    .centerline
                    .sample_points(4.0)
                    .into_iter()
                    .map(|p| Point { x: p.x, y: p.y })
                    .collect()
            })
            .collect();
        let at = |lane: usize, arc: f64| {
            let p = net.lane(lane).centerline.point_at(arc);
            Point { x: p.x, y: p.y }
        };
        Scene {
            lanes,
            lane_width: net.lane(net.main_lanes[0]).width,
            checkpoints: s.checkpoints.iter().map(|c| at(c.lane, c.arc)).collect(),
            stop_lines: s
                .stop_lines
                .iter()
                .map(|l| {
                    at(
                        net.reference_lane,
                        net.arc_at_station(net.reference_lane, l.station),
                    )
                })
                .collect(),
            features: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
            theta: self.theta.clone(),
        }
    }

    pub fn status(&self) -> Status {
        let w = &self.world;
        let vehicle = |x: f64, y: f64, yaw: f64| Vehicle { x, y, yaw };
        Status {
            cycle: self.mpc.cycle,
            time: w.time,
            ego: vehicle(w.ego.x, w.ego.y, w.ego.yaw),
            speed: w.ego.v,
            traffic: w
                .scenario
                .vehicles
                .iter()
                .map(|v| {
                    let p = v.pose_at(&w.scenario.network, w.time);
                    vehicle(p.x, p.y, p.yaw)
                })
                .collect(),
            trail: self.trail.clone(),
            checkpoint_hits: w.checkpoint_hits.clone(),
            stops_satisfied: w.stops_satisfied.clone(),
            stop_violations: w.stop_violations,
            collisions: w.collisions,
            lap_complete: w.lap_complete(),
        }
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    /// Samples the current cycle's policy set and evaluates it.
    pub fn sample(&mut self) -> Result<Sampled> {
        self.set = Some(self.mpc.plan(&self.world)?);
        self.evaluated()
    }

    /// Sets one reward weight and re-evaluates the last sampled set.
    pub fn reweight(&mut self, index: usize, value: f64) -> Result<Sampled> {
        let mut theta = self.theta.clone();
        if let Some(t) = theta.get_mut(index) {
            *t = value;
        }
        self.theta = RewardWeights::new(theta)?.theta;
        match self.set {
            Some(_) => self.evaluated(),
            None => self.sample(),
        }
    }

    fn evaluated(&mut self) -> Result<Sampled> {
        let set = self.set.as_mut().expect("sampled set");
        let optimal = evaluate(set, &RewardWeights::new(self.theta.clone())?)?;
        let probabilities = policy_distribution(set, &self.theta)?.probabilities;
        let paths = set
            .policies
            .iter()
            .map(|p| {
                p.states
                    .iter()
                    .step_by(5)
                    .map(|s| Point { x: s.x, y: s.y })
                    .collect()
            })
            .collect();
        Ok(Sampled {
            paths,
            probabilities,
            optimal,
        })
    }

    /// Drives `cycles` planning cycles, choosing with the current weights or
    /// with the expert planner.
    pub fn drive(&mut self, cycles: usize, expert: bool) -> Result<Status> {
        let selection = if expert {
            Selection::Expert
        } else {
            Selection::Theta(RewardWeights::new(self.theta.clone())?)
        };
        for _ in 0..cycles {
            let out = self.mpc.step(&mut self.world, &selection)?;
            let n = self.mpc.config.steps_per_cycle();
            self.trail.extend(
                out.set.policies[out.chosen].states[1..=n]
                    .iter()
                    .map(|s| Point { x: s.x, y: s.y }),
            );
        }
        self.set = None;
        Ok(self.status())
    }
}

fn js<T: Serialize>(value: Result<T>) -> std::result::Result<String, JsError> {
    let value = value.map_err(|e| JsError::new(&e.to_string()))?;
    serde_json::to_string(&value).map_err(|e| JsError::new(&e.to_string()))
}

/// JavaScript handle to a [`Session`]; every method returns JSON.
#[wasm_bindgen]
pub struct WebSession(Session);

#[wasm_bindgen]
impl WebSession {
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32) -> std::result::Result<WebSession, JsError> {
        Session::new(seed as u64)
            .map(WebSession)
            .map_err(|e| JsError::new(&e.to_string()))
    }

    pub fn scene(&self) -> std::result::Result<String, JsError> {
        js(Ok(self.0.scene()))
    }

    pub fn status(&self) -> std::result::Result<String, JsError> {
        js(Ok(self.0.status()))
    }

    pub fn sample(&mut self) -> std::result::Result<String, JsError> {
        js(self.0.sample())
    }

    pub fn reweight(&mut self, index: usize, value: f64) -> std::result::Result<String, JsError> {
        js(self.0.reweight(index, value))
    }

    pub fn drive(&mut self, cycles: usize, expert: bool) -> std::result::Result<String, JsError> {
        js(self.0.drive(cycles, expert))
    }

    #[wasm_bindgen(js_name = featureCount)]
    pub fn feature_count() -> usize {
        K
    }
}
