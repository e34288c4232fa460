//! Joint purchasing and pricing control for assembly plants that buy raw
//! materials at random prices and sell products under random demand.
//!
//! - [`model`]: plant description, validation and slot accounting.
//! - [`processes`]: supply/demand state processes and random streams.
//! - [`controller`]: the online purchasing and pricing controller.
//! - [`oracles`]: linear-programming benchmarks for the optimal profit.
//! - [`simulator`]: episodes, metrics and bound checks.

pub mod controller;
pub mod instances;
pub mod knapsack;
pub mod model;
pub mod oracles;
pub mod processes;
pub mod simulator;
