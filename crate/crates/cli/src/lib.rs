//! Experiment harness around the `modelcheck` library: configuration,
//! CSV ingestion, replication sweeps and result files.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod csvio;
pub mod error;
pub mod experiment;
pub mod output;
pub mod watertank;

pub use config::{ConfigBuilder, Experiment, ExperimentConfig, Method};
pub use csvio::{load_timeseries_csv, write_timeseries_csv};
pub use error::{CliError, Result};
pub use experiment::{cumulative_trace, experiment_records, run_cumulative, run_experiment, TraceRow};
pub use output::{write_result_set, MethodSummary, ResultFiles, ResultRecord};
pub use watertank::run_watertank;
