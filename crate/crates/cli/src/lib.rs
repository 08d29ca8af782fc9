//! Experiment harness for `blockbfgs`: loads a LIBSVM dataset, sweeps every
//! method over a stepsize grid and a set of seeds, estimates the optimal value
//! as the smallest objective value seen, and writes per-method CSV traces, a
//! best-stepsize summary and optionally a matplotlib script.
//!
//! CSV schema (one file per method, `<label>.csv`):
//!
//! ```text
//! method,eta,seed,datapasses,seconds,fvalue,error
//! ```
//!
//! Floats carry 17 significant digits. `error` is `fvalue - f_star`. A run
//! that hit a non-finite iterate ends with a marker row whose `fvalue` and
//! `error` are `NaN`, placed at the datapass count where it was aborted.

use std::path::PathBuf;

use thiserror::Error;

pub mod config;
pub mod experiment;
pub mod method;
pub mod output;

pub use experiment::{
    default_grid, estimate_optimum, run_experiment, select_best, sweep, BestEta, ExperimentReport, ExperimentSpec,
    OptionPreset, RunOutcome,
};
pub use method::{MethodDefaults, MethodName, MethodSpec};
pub use output::{read_result_csv, ResultRow, CSV_HEADER};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    IoFailure {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    ParseFailure {
        path: PathBuf,
        #[source]
        source: blockbfgs::dataset::DatasetError,
    },
    #[error("{}: {source}", path.display())]
    ConfigFile {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },
    #[error("{}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("every run diverged; no reference optimum available")]
    AllRunsDiverged,
    #[error(transparent)]
    Optimizer(#[from] blockbfgs::optimizer::OptimizerError),
    #[error(transparent)]
    Objective(#[from] blockbfgs::objective::ObjectiveError),
}
