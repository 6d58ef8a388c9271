//! Scenario files, check execution and report output.

pub mod config;
pub mod plot;
pub mod report;
pub mod run;

pub use config::{load_scenario, parse_scenario, Check, Scenario};
pub use run::{apply_overrides, run_scenario, write_outputs, OutputPaths, Overrides, RunOutput};
