//! Scenario files and subcommands of the `plantsim` binary.

pub mod commands;
pub mod scenario;
