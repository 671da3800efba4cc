//! Scenario runner and report bundle for the cimsim simulator.
pub mod bundle;
mod error;
pub mod models;
pub mod run;
pub mod scenario;
pub mod selftest;

pub use error::Failure;
pub use run::{run_scenario, Report, RunOutcome, RunPlan, StageRecord};
pub use scenario::{Scenario, SCHEMA_MAJOR, SCHEMA_VERSION};
