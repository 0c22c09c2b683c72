use std::path::PathBuf;

use apll_core::config::ConfigError;
use apll_core::ctrl::CtrlError;
use apll_core::engine::EngineError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: no such file")]
    MissingFile { path: PathBuf },
    #[error("{path}:{line}:{column}: {message}")]
    Syntax { path: PathBuf, line: usize, column: usize, message: String },
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error("simulation diverged at t = {time} s (partial trace in {partial})")]
    Divergence { time: f64, partial: PathBuf },
    #[error("{0}")]
    Infeasible(#[from] CtrlError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    BadTrace { path: PathBuf, message: String },
}

impl CliError {
    /// Process exit status, one per error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::MissingFile { .. } | CliError::Syntax { .. } | CliError::Config(_) | CliError::Usage(_) => 2,
            CliError::Divergence { .. } => 3,
            CliError::Infeasible(_) => 4,
            CliError::Io { .. } | CliError::BadTrace { .. } => 5,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> CliError {
        CliError::Io { path: path.into(), source }
    }

    /// Maps an engine error; divergence is handled by the caller, which owns
    /// the partial trace.
    pub fn from_engine(e: EngineError) -> CliError {
        match e {
            EngineError::Config(c) => CliError::Config(c),
            EngineError::Scenario(s) => CliError::Usage(s),
            EngineError::Infeasible(c) => CliError::Infeasible(c),
            EngineError::Divergence { time, .. } => CliError::Divergence { time, partial: PathBuf::new() },
        }
    }
}
