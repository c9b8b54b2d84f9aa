use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the feature-selection pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// File access or CSV framing problems (missing file, ragged rows, ...).
    #[error("i/o error reading {path}: {message}")]
    Io { path: PathBuf, message: String },

    /// Data that parsed but violates a dataset invariant.
    #[error("data error: {0}")]
    Data(String),

    /// Shape requirements between matrices, e.g. the Stiefel feasibility rule d >= k.
    #[error("dimension error: {0}")]
    Dimension(String),

    /// Numerical breakdown (rank-deficient retraction input, singular solve, ...).
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Invalid configuration values (step sizes, simplex weights, schedules, ...).
    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
