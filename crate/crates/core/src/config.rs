//! The configuration document shared by every command.
//!
//! A TOML document with one table per component. Sections left out take their
//! defaults. The dataset hash covers only what determines the recorded cycles
//! (scenario, planner and distance weights), so training settings can change
//! without invalidating collected data.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::datasets::synthetic::SyntheticConfig;
use crate::demos::DistanceWeights;
use crate::error::{Error, Result};
use crate::irl::LirlConfig;
use crate::nn::{NnConfig, TanConfig};
use crate::planner::PlannerConfig;
use crate::world::ScenarioConfig;

/// Source of a collected corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CollectKind {
    /// Expert laps in the simulator, re-planned under a random reward.
    Simulation,
    /// Synthetic cycles of a single task.
    SingleTask,
    /// Synthetic cycles with two conflicting tasks.
    TwoTask,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CollectConfig {
    pub kind: CollectKind,
    /// Planning cycles per expert lap, or per synthetic split.
    pub cycles: usize,
    /// Scenario seeds of the expert laps per split.
    pub train_laps: Vec<u64>,
    pub val_laps: Vec<u64>,
    pub test_laps: Vec<u64>,
    /// Draws a fresh random reward every cycle instead of once per run.
    pub per_cycle_theta: bool,
    /// Task switch positions of the synthetic sequential split.
    pub switches: Vec<usize>,
    pub synthetic: SyntheticConfig,
}

impl Default for CollectConfig {
    fn default() -> Self {
        Self {
            kind: CollectKind::Simulation,
            cycles: 240,
            train_laps: (101..=106).collect(),
            val_laps: vec![107],
            test_laps: vec![108, 109],
            per_cycle_theta: false,
            switches: vec![100, 200],
            synthetic: SyntheticConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub scenario: ScenarioConfig,
    pub planner: PlannerConfig,
    pub distance: DistanceWeights,
    pub lirl: LirlConfig,
    pub nn: NnConfig,
    pub tan: TanConfig,
    pub collect: CollectConfig,
}

#[derive(Serialize)]
struct Hashed<'a> {
    scenario: &'a ScenarioConfig,
    planner: &'a PlannerConfig,
    distance: &'a DistanceWeights,
    kind: CollectKind,
    synthetic: &'a SyntheticConfig,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self =
            toml::from_str(text).map_err(|e| Error::format("config", e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::format("config", e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.planner.validate()?;
        if self.collect.cycles == 0 && self.collect.kind != CollectKind::Simulation {
            return Err(Error::invalid(
                "config",
                "synthetic collection needs at least one cycle",
            ));
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON of the sections that shape recorded
    /// cycles.
    pub fn data_hash(&self) -> String {
        let hashed = Hashed {
            scenario: &self.scenario,
            planner: &self.planner,
            distance: &self.distance,
            kind: self.collect.kind,
            synthetic: &self.collect.synthetic,
        };
        let json = serde_json::to_vec(&hashed).expect("config sections serialize");
        hex::encode(Sha256::digest(&json))
    }
}
