//! Experiment harness around `virecon-core`: benchmark problems,
//! configuration parsing, convergence/effectivity studies, the adaptive
//! refinement loop, and CSV/VTK output.

pub mod benchmarks;
pub mod config;
pub mod experiment;
pub mod output;
pub mod selftest;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unknown benchmark '{0}'")]
    UnknownBenchmark(String),
    #[error(transparent)]
    Core(#[from] virecon_core::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Run(String),
}
