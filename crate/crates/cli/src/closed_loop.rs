//! Closed-loop driving with live reward prediction.

use std::path::Path;

use pirl_core::config::Config;
use pirl_core::planner::{evaluate, Mpc, PlannerConfig, RewardWeights, FEATURE_NAMES};
use pirl_core::world::{Scenario, ScenarioConfig, World};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::eval::write_vectors;
use crate::method::Method;
use crate::model::{Model, Predictor};
use crate::output::{header, num, write_csv, write_json};

/// Mission outcome of one lap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LapSummary {
    pub method: Method,
    pub seed: u64,
    pub cycles: usize,
    pub distance: f64,
    pub lap_complete: bool,
    pub checkpoint_hits: Vec<bool>,
    pub stops_satisfied: Vec<bool>,
    pub stop_violations: usize,
    pub collisions: usize,
}

impl LapSummary {
    /// Full lap, every checkpoint and stop line, no violations or collisions.
    pub fn success(&self) -> bool {
        self.lap_complete && self.stop_violations == 0 && self.collisions == 0
    }
}

/// State and prediction after one executed cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopRow {
    pub cycle: usize,
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
    pub v: f64,
    pub station: f64,
    pub chosen: usize,
    pub theta: Vec<f64>,
    pub weights: Option<Vec<f64>>,
    pub attention: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LapRun {
    pub summary: LapSummary,
    pub rows: Vec<LoopRow>,
}

/// Drives until the lap is covered or `max_cycles` elapse; the scenario and
/// the planner are both seeded with `seed`.
pub fn drive(
    config: &Config,
    model: &Model,
    seed: u64,
    history: usize,
    max_cycles: usize,
) -> Result<LapRun> {
    let mut world = World::new(Scenario::build(&ScenarioConfig {
        seed,
        ..config.scenario.clone()
    })?);
    let mut mpc = Mpc::new(PlannerConfig {
        seed,
        ..config.planner.clone()
    })?;
    let mut predictor = Predictor::new(model, history)?;
    let mut rows = Vec::new();
    while rows.len() < max_cycles
        && !world.lap_complete()
        && world.distance_travelled < world.lap_length()
    {
        let mut prediction = None;
        let out = mpc.step_with(&mut world, |set, _, _| {
            set.sort_by_progress();
            let p = predictor.next(set)?;
            let chosen = evaluate(set, &RewardWeights::new(p.theta.clone())?)?;
            prediction = Some(p);
            Ok((chosen, false))
        })?;
        let p = prediction.expect("selector ran");
        let e = world.ego;
        rows.push(LoopRow {
            cycle: rows.len(),
            t: e.t,
            x: e.x,
            y: e.y,
            yaw: e.yaw,
            v: e.v,
            station: world.station(),
            chosen: out.chosen,
            theta: p.theta,
            weights: p.weights,
            attention: p.attention,
        });
    }
    let summary = LapSummary {
        method: model.method(),
        seed,
        cycles: rows.len(),
        distance: world.distance_travelled,
        lap_complete: world.lap_complete(),
        checkpoint_hits: world.checkpoint_hits.clone(),
        stops_satisfied: world.stops_satisfied.clone(),
        stop_violations: world.stop_violations,
        collisions: world.collisions,
    };
    log::info!(
        "{} seed {seed}: {} cycles, checkpoints {:?}, stops {:?}, {} collisions",
        summary.method,
        summary.cycles,
        summary.checkpoint_hits,
        summary.stops_satisfied,
        summary.collisions
    );
    Ok(LapRun { summary, rows })
}

pub fn write(run: &LapRun, history: usize, out: &Path) -> Result<()> {
    std::fs::create_dir_all(out)?;
    let header_row: Vec<String> = ["cycle", "t", "x", "y", "yaw", "v", "station", "chosen"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    write_csv(
        &out.join("trajectory.csv"),
        &header_row,
        run.rows.iter().map(|r| {
            vec![
                r.cycle.to_string(),
                num(r.t),
                num(r.x),
                num(r.y),
                num(r.yaw),
                num(r.v),
                num(r.station),
                r.chosen.to_string(),
            ]
        }),
    )?;
    let trace_header: Vec<String> = std::iter::once("cycle".to_string())
        .chain(FEATURE_NAMES.iter().map(|s| s.to_string()))
        .chain(header(&[], "w", history))
        .collect();
    write_csv(
        &out.join("trace.csv"),
        &trace_header,
        run.rows.iter().map(|r| {
            std::iter::once(r.cycle.to_string())
                .chain(r.theta.iter().map(|x| num(*x)))
                .chain(r.weights.iter().flatten().map(|x| num(*x)))
                .collect::<Vec<_>>()
        }),
    )?;
    let attention: Vec<(u64, Vec<f64>)> = run
        .rows
        .iter()
        .filter_map(|r| r.attention.clone().map(|a| (r.cycle as u64, a)))
        .collect();
    if let Some(n) = attention.first().map(|(_, a)| a.len()) {
        write_vectors(
            &out.join("attention.csv"),
            header(&[], "slot", n),
            &attention,
        )?;
    }
    let mut summary = serde_json::to_value(&run.summary)?;
    summary["success"] = run.summary.success().into();
    write_json(&out.join("summary.json"), &summary)
}
