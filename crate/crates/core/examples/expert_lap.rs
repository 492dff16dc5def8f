//! Drives one lap with the expert planner and prints mission progress.

use pirl_core::planner::{Mpc, PlannerConfig, Selection};
use pirl_core::world::{Scenario, ScenarioConfig, World};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed: u64 = std::env::args()
        .nth(1)
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or(1);
    let verbose = std::env::args().any(|a| a == "-v");
    let scenario = Scenario::build(&ScenarioConfig {
        seed,
        ..Default::default()
    })?;
    let mut world = World::new(scenario);
    let mut mpc = Mpc::new(PlannerConfig::default())?;
    let max_cycles = 600;
    for c in 0..max_cycles {
        let out = mpc.step(&mut world, &Selection::Expert)?;
        let e = &world.ego;
        if verbose
            || !out.events.checkpoints_hit.is_empty()
            || !out.events.checkpoints_missed.is_empty()
            || !out.events.stops_satisfied.is_empty()
            || !out.events.stop_violations.is_empty()
            || out.events.collisions > 0
        {
            println!(
                "cycle {c:4} t={:6.1} st={:7.1} v={:5.2} k={:+.4} lane={} ev={:?} fb={}",
                e.t,
                world.station(),
                e.v,
                e.curvature,
                world
                    .network()
                    .main_lane_at(world.network().road_frame(e.x, e.y).1),
                out.events,
                out.fallback
            );
        }
        if world.lap_complete() || world.distance_travelled >= world.lap_length() {
            break;
        }
    }
    println!(
        "done t={:.1} dist={:.1} hits={:?} stops={:?} viol={} coll={} complete={}",
        world.time,
        world.distance_travelled,
        world.checkpoint_hits,
        world.stops_satisfied,
        world.stop_violations,
        world.collisions,
        world.lap_complete()
    );
    Ok(())
}
