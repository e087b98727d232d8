//! Batch experiments: config parsing, sensitivity sweeps of the effective
//! tensors, the single-cell demonstration, the scale-convergence study and
//! their CSV, SVG and manifest outputs.

pub mod config;
pub mod demo;
pub mod eig;
pub mod output;
pub mod svg;
pub mod sweep;

use std::path::PathBuf;

use thiserror::Error;

pub use config::{parse_config, parse_config_str, Experiment, SweepSpec};
pub use demo::{run_convergence, run_single_cell_demo, ConvergenceResult, SingleCellResult};
pub use eig::{eig2x2_symmetric, magnitude_ratio, Eig2};
pub use output::{emit_convergence, emit_outputs, emit_single_cell};
pub use sweep::{run_sweep, workers_from_env, PointRecord, PointTensors, SweepResult};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config-missing-key {0}")]
    ConfigMissingKey(String),
    #[error("config-invalid {0}")]
    ConfigInvalid(String),
    #[error(transparent)]
    Solver(#[from] epihom_core::Error),
    #[error("io-error {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    /// 2 for config errors, 3 for solver failures, 1 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::ConfigMissingKey(_) | Self::ConfigInvalid(_) => 2,
            Self::Solver(_) => 3,
            Self::Io { .. } => 1,
        }
    }
}

/// Runs the experiment named in `spec` and writes its outputs to
/// `spec.output_dir`. Returns the written paths.
pub fn execute(spec: &SweepSpec) -> Result<Vec<PathBuf>, CliError> {
    let dir = spec.output_dir.clone();
    match spec.experiment {
        Experiment::SingleCell => emit_single_cell(&run_single_cell_demo(spec)?, spec, &dir),
        Experiment::Convergence => emit_convergence(&run_convergence(spec)?, spec, &dir),
        _ => {
            let workers = workers_from_env()?;
            let result = run_sweep(spec, workers)?;
            emit_outputs(&result, spec, &dir, workers)
        }
    }
}
