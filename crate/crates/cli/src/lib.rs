//! Scenario configuration and the batch pipeline behind the `largesol`
//! binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod run;

pub use config::{ConfigError, Kind, ScenarioConfig};
pub use run::{run_scenario, RunReport, Verdict};
