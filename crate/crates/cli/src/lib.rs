//! Batch experiments for random walks in random scenery: configuration,
//! dispatch to the estimators of `rwrs_core`, CSV output and verdicts.

pub mod config;
pub mod experiment;
pub mod output;

pub use config::{ExperimentConfig, ExperimentKind};
pub use experiment::{refit, run_experiment, run_with_threads, Outcome, Verdict};
pub use output::{emit_csv, load_csv, read_csv, to_csv_string, write_csv, ResultRow};
