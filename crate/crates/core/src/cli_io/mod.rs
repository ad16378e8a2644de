//! Configuration files, commands and on-disk formats.

pub mod commands;
pub mod config;
pub mod snapshot;

pub use commands::{cmd_diagnose, cmd_solve, cmd_sweep, CommandOptions, SolveSummary, SweepRow};
pub use config::{ProbeConfig, RunConfig, SweepConfig, FORMAT_VERSION};
