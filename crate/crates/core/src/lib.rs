//! Situation-dependent reward learning for a sampling-based trajectory planner.
//!
//! The crate contains the driving environment ([`world`]), the sampling
//! planner and its path-integral features ([`planner`]), demonstration
//! projection ([`demos`]), maximum-entropy IRL and its metrics ([`irl`]), a
//! small reverse-mode network kit with the attention architectures ([`nn`]),
//! dataset collection and storage ([`datasets`]) and the shared configuration
//! document ([`config`]).

pub mod config;
pub mod datasets;
pub mod demos;
pub mod error;
pub mod irl;
pub mod nn;
pub mod planner;
pub mod world;

pub use config::Config;
pub use error::{Error, Result};
