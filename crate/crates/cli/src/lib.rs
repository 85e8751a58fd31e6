//! Config-driven twin experiments for `condexp`, written out as CSV/JSON result bundles.

pub mod compare;
pub mod config;
pub mod run;

pub use compare::{compare_runs, write_comparison, ComparisonRow};
pub use config::{parse_config, ConfigError, ExperimentConfig};
pub use run::{run_experiment, RunError, RunOutcome};
