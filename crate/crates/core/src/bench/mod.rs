//! Experiment runner: configuration, data ingestion, seeded orchestration
//! of (algorithm, seed) cells, trace persistence and plots.

pub mod config;
pub mod dataset;
pub mod experiments;
pub mod init;
pub mod plot;
pub mod standin;

use thiserror::Error;

use crate::algorithms::AlgorithmError;
use crate::metrics::MetricsError;
use crate::oracle::OracleError;

pub use config::{DataSpec, ExperimentConfig, ExperimentKind, InitMode, ProbeKind, RawConfig};
pub use dataset::{load_dataset, Dataset, DatasetError};
pub use experiments::{
    run_artificial_d2, run_experiment, run_kscl_sweep, run_real_distortion, CellResult, ExperimentReport,
};
pub use init::{initial_codebook, DataModel};
pub use plot::{emit_plot, render_svg, PlotError};

/// Random stream of the training data of a seed.
pub const DATA_STREAM: u64 = 0;
/// Random stream of the initial codebook of a seed.
pub const INIT_STREAM: u64 = 1;
/// Random stream of the evaluation sample of a seed.
pub const EVAL_STREAM: u64 = 2;
/// Random stream of the oracle's empirical cross-check sample.
pub const ORACLE_CHECK_STREAM: u64 = 4;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("config error: {0}")]
    Config(String),
    #[error("need {needed} distinct data points, data set has {distinct}")]
    NotEnoughDistinctPoints { needed: usize, distinct: usize },
    #[error("oracle did not converge: residual {residual:e} after {iterations} iterations")]
    OracleNotConverged { residual: f64, iterations: usize },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Algorithm(#[from] AlgorithmError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Plot(#[from] PlotError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl BenchError {
    /// Process exit code: 1 for configuration problems, 2 for failures
    /// while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Config(_) | BenchError::NotEnoughDistinctPoints { .. } => 1,
            _ => 2,
        }
    }

    pub(crate) fn io(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> BenchError + '_ {
        move |source| BenchError::Io { path: path.display().to_string(), source }
    }
}

/// Median of a nonempty slice (mean of the middle pair for even length).
/// Reorders the slice.
pub fn median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty(), "median of an empty slice");
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    }
}
