//! Command-line driver for collection, training, evaluation, closed-loop
//! driving and reporting.
//!
//! Each subcommand is also available as a library function so the whole
//! pipeline can be scripted and tested without spawning processes.

pub mod args;
pub mod closed_loop;
pub mod collect;
pub mod error;
pub mod eval;
pub mod method;
pub mod model;
pub mod output;
pub mod report;
pub mod train;

use std::path::Path;

use pirl_core::config::Config;

pub use args::{Cli, Command};
pub use error::{CliError, Result};
pub use method::Method;

/// The configuration at `path`, or the defaults.
pub fn load_config(path: Option<&Path>) -> Result<Config> {
    match path {
        Some(p) => {
            error::require(p)?;
            Ok(Config::load(p)?)
        }
        None => Ok(Config::default()),
    }
}

fn check_method(model: &model::Model, expected: Option<Method>) -> Result<()> {
    match expected {
        Some(m) if m != model.method() => Err(CliError::Usage(format!(
            "model was trained with {}, not {m}",
            model.method()
        ))),
        _ => Ok(()),
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Collect(a) => {
            let config = load_config(a.config.as_deref())?;
            collect::collect(&config, a.seed, &a.out)?;
        }
        Command::Train(a) => {
            let config = load_config(a.config.as_deref())?;
            train::train(&train::TrainRequest {
                config: &config,
                manifest: &a.manifest,
                sequence: a.sequence.as_deref(),
                method: a.method,
                history: a.history,
                seed: a.seed,
                out: &a.out,
            })?;
        }
        Command::Eval(a) => {
            let config = load_config(a.config.as_deref())?;
            let model = model::Model::load(&a.model)?;
            check_method(&model, a.method)?;
            eval::eval(&config, &a.manifest, &model, a.history, &a.out)?;
        }
        Command::Closedloop(a) => {
            let config = load_config(a.config.as_deref())?;
            let model = model::Model::load(&a.model)?;
            check_method(&model, a.method)?;
            let lap = closed_loop::drive(&config, &model, a.seed, a.history, a.cycles)?;
            closed_loop::write(&lap, a.history, &a.out)?;
        }
        Command::Report(a) => {
            report::report(&a.runs, &a.out)?;
        }
    }
    Ok(())
}
