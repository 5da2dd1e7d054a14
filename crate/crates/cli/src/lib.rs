//! Command-line front end: configuration files, scenarios and reports.

pub mod config;
pub mod report;
pub mod scenarios;

pub use scenarios::{run_scenario, RunError, SCENARIOS};
