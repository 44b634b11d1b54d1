//! Scenario-driven front end for the `dqm` binary.

pub mod commands;
pub mod error;
pub mod output;
pub mod scenario;

pub use commands::{compare, execute, run, sweep, validate, Comparison, RunOptions, SweepOutcome};
pub use error::CliError;
