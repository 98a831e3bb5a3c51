//! Library surface of the experiment runner, used by the binary and by
//! the integration and acceptance suites.

pub mod config;
pub mod runner;

pub use config::{ExperimentConfig, ExperimentKind};
pub use runner::{locate_threshold, loop_connectivity, multi_start_uniqueness, run};
