//! Reproducible experiment harness for the CPA sparse-recovery library:
//! configuration, the four benchmark experiments, result files and the
//! command-line driver.

pub mod cli;
pub mod config;
pub mod experiments;
pub mod results;

pub use config::{Algorithm, Experiment, ExperimentConfig};
pub use experiments::{
    run_complexity_sweep, run_experiment, run_lambda_sweep, run_masking_robustness,
    run_novel_representation,
};
pub use results::{DensityRow, ExperimentOutput, Records, ResultRow};

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] cpa_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl BenchError {
    /// 2 for configuration problems, 1 for everything that fails at run time.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Config(_) => 2,
            _ => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> BenchError {
        let path = path.into();
        move |source| BenchError::Io { path, source }
    }
}
