//! Error type for the command-line layer.

use std::path::PathBuf;

use thiserror::Error;

/// Errors raised while loading data, interpreting configuration, running the
/// evaluation protocols, or writing results.
#[derive(Debug, Error)]
pub enum PredictError {
    /// Filesystem failure, annotated with the path involved.
    #[error("i/o failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Structural CSV failure (ragged rows, bad quoting, encoding).
    #[error("malformed csv in {path}: {message}")]
    MalformedCsv { path: PathBuf, message: String },

    /// A cell that is neither numeric nor a recognized missing-value marker.
    #[error("{path}:{line}:{column} (column '{name}'): cannot parse '{value}' as a number")]
    BadCell {
        path: PathBuf,
        /// 1-based file line (the header is line 1).
        line: u64,
        /// 1-based column position.
        column: usize,
        name: String,
        value: String,
    },

    /// The requested response column is absent from the header.
    #[error("response column '{name}' not found; header has {header:?}")]
    MissingResponse { name: String, header: Vec<String> },

    /// The file defines no data rows after dropping incomplete ones.
    #[error("no complete rows remain in {path} after dropping {dropped} incomplete rows")]
    NoCompleteRows { path: PathBuf, dropped: usize },

    /// A column cannot be standardized because it does not vary.
    #[error("column '{0}' has zero variance and cannot be standardized")]
    ZeroVarianceColumn(String),

    /// Configuration file or field rejected.
    #[error("configuration error: {0}")]
    Config(String),

    /// Command-line argument rejected.
    #[error("argument error: {0}")]
    Argument(String),

    /// An evaluation split could not be completed.
    #[error("split {split} failed: {source}")]
    SplitFailed {
        split: usize,
        #[source]
        source: Box<PredictError>,
    },

    /// Failure propagated from the model and solver layer.
    #[error(transparent)]
    Core(#[from] cpp_core::CppError),
}

/// Convenience alias used across the crate.
pub type Result<T> = std::result::Result<T, PredictError>;

impl PredictError {
    /// Wraps an i/o error with its path.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        PredictError::Io {
            path: path.into(),
            source,
        }
    }
}
