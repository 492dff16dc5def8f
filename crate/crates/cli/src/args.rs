//! Command-line arguments.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::method::Method;

#[derive(Debug, Parser)]
#[command(
    name = "pirl",
    version,
    about = "Situation-dependent reward learning for a sampling-based planner"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Drive expert laps (or generate synthetic cycles) and write datasets.
    Collect(CollectArgs),
    /// Train a reward model on a collected dataset.
    Train(TrainArgs),
    /// Evaluate a trained model on the held-out sequential split.
    Eval(EvalArgs),
    /// Drive one lap with live reward prediction.
    Closedloop(ClosedLoopArgs),
    /// Aggregate evaluation runs into summary tables.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct CollectArgs {
    /// Configuration document (TOML); defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Training dataset manifest written by `collect`.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Sequential dataset for the temporal network [default: expert.json next to the manifest].
    #[arg(long)]
    pub sequence: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub method: Method,
    /// Cycles of reward history used by the temporal network.
    #[arg(long, default_value_t = 10)]
    pub history: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Sequential dataset manifest; its test split is evaluated.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Model directory written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    /// Fails unless the model was trained with this method.
    #[arg(long, value_enum)]
    pub method: Option<Method>,
    #[arg(long, default_value_t = 10)]
    pub history: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ClosedLoopArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, value_enum)]
    pub method: Option<Method>,
    #[arg(long, default_value_t = 10)]
    pub history: usize,
    /// Scenario and planner seed.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Cycle budget for the lap.
    #[arg(long, default_value_t = 400)]
    pub cycles: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Evaluation output directories.
    #[arg(required = true)]
    pub runs: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}
