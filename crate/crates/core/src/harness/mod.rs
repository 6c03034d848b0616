//! Run configuration, experiment sweeps, result files and the CLI.

pub mod cli;
pub mod config;
pub mod results;
pub mod selftest;
pub mod sweep;

pub use config::{Mode, RunConfig, RunSection};
