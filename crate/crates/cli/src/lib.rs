//! Experiment runner for the square-function library: configuration,
//! corpus generation, experiment execution, and CSV/JSON report emission.

pub mod config;
pub mod experiments;
pub mod report;

pub use config::{ConfigError, ExperimentConfig, ExperimentKind, WeightPreset};
pub use experiments::{run, tolerances};
pub use report::{Cell, ExperimentReport, OutputFormat, Status, Verdict};
