//! Experiment plumbing: configuration, synthetic tasks, the instrumented
//! training run, assumption audits, report files and the command line.

pub mod audit;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod experiment;
pub mod report;

pub use audit::{AuditResult, Verdict};
pub use config::ExperimentConfig;
pub use dataset::{generate_dataset, DatasetKind, DatasetSpec};
pub use experiment::{run_experiment, RunOutput};
