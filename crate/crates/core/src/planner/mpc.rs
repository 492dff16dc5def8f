//! Receding-horizon loop: plan, execute the first cycle period, repeat.

use super::{
    evaluate, expert_select, sample_policy_set, PlannerConfig, PlanningContext, PolicySet,
    RewardWeights,
};
use crate::error::Result;
use crate::world::{StepEvents, World};

/// How the executed policy is chosen in a cycle.
#[derive(Debug, Clone)]
pub enum Selection {
    Theta(RewardWeights),
    Expert,
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub set: PolicySet,
    pub chosen: usize,
    pub fallback: bool,
    pub events: StepEvents,
}

pub struct Mpc {
    pub config: PlannerConfig,
    pub cycle: u64,
}

impl Mpc {
    pub fn new(config: PlannerConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config, cycle: 0 })
    }

    /// Per-cycle sampling seed derived from the planner seed.
    pub fn cycle_seed(&self, cycle: u64) -> u64 {
        self.config.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15)
            ^ cycle.wrapping_mul(0xbf58_476d_1ce4_e5b9)
    }

    /// Samples the policy set for the current world state without executing.
    pub fn plan(&self, world: &World) -> Result<PolicySet> {
        let ctx = PlanningContext::from_world(world, &self.config)?;
        sample_policy_set(&ctx, &self.config, self.cycle, self.cycle_seed(self.cycle))
    }

    /// Runs one cycle; `select` may override the choice made by `selection`
    /// (used by learned planners that need the whole set).
    pub fn step(&mut self, world: &mut World, selection: &Selection) -> Result<StepOutcome> {
        let size = (world.scenario.ego_length, world.scenario.ego_width);
        self.step_with(world, |set, ctx, config| match selection {
            Selection::Theta(w) => Ok((evaluate(set, w)?, false)),
            Selection::Expert => {
                let c = expert_select(set, ctx, config, size)?;
                Ok((c.index, c.fallback))
            }
        })
    }

    /// Runs one cycle with a custom selector.
    pub fn step_with<F>(&mut self, world: &mut World, mut select: F) -> Result<StepOutcome>
    where
        F: FnMut(&mut PolicySet, &PlanningContext, &PlannerConfig) -> Result<(usize, bool)>,
    {
        let ctx = PlanningContext::from_world(world, &self.config)?;
        let mut set =
            sample_policy_set(&ctx, &self.config, self.cycle, self.cycle_seed(self.cycle))?;
        let (chosen, fallback) = select(&mut set, &ctx, &self.config)?;
        drop(ctx);
        let n = self.config.steps_per_cycle();
        let executed = set.policies[chosen].states[1..=n].to_vec();
        let events = world.advance(&executed);
        self.cycle += 1;
        Ok(StepOutcome {
            set,
            chosen,
            fallback,
            events,
        })
    }
}
