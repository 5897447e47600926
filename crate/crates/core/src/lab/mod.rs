//! Experiment orchestration: configuration, runners and report emission.

pub mod config;
pub mod report;
pub mod runs;

pub use config::{DriftChoice, ExperimentConfig, ExperimentKind, PsdChoice};
pub use report::{Check, RunReport, Rows, SlopeReport, SCHEMA_VERSION};
pub use runs::run;
