//! Experiment configuration, sweeps and CSV reports.

pub mod config;
pub mod experiment;
pub mod report;

pub use config::{ExperimentConfig, ExperimentKind, GraphSource, OpinionSource};
pub use experiment::{
    build_instance, run_comparison_experiment, run_experiment, run_increase_experiment,
    ComparisonAxis, Inputs, Instance,
};
pub use report::{Report, ReportRow};
