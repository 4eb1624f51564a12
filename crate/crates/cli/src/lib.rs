//! Experiment driver around [`outwave_core`]: initial-data presets, run
//! orchestration, convergence studies, and reproducible CSV/JSON emission.
//!
//! Everything the binary does goes through this library so the behavior is
//! testable in-process; `main.rs` only parses flags and maps errors to exit
//! codes.

pub mod config;
pub mod convergence;
pub mod experiment;
pub mod pool;
pub mod preset;

pub use config::{ConfigError, ExperimentConfig, Gates, PresetConfig, PresetShape};
pub use convergence::{run_convergence, ConvergenceReport};
pub use experiment::{run_experiment, ExperimentReport, RunVerdict};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(#[from] ConfigError),
    #[error("solver error: {0}")]
    Solver(#[from] outwave_core::evolve::EvolveError),
    #[error("diagnostics error: {0}")]
    Diagnostics(#[from] outwave_core::diagnostics::DiagnosticsError),
    #[error("i/o error at {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
}

/// Exit-code contract of the binary.
pub const EXIT_OK: i32 = 0;
pub const EXIT_GATES_FAILED: i32 = 2;
pub const EXIT_NUMERICAL_ABORT: i32 = 3;
pub const EXIT_CONFIG_ERROR: i32 = 4;
