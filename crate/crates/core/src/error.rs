//! Error type shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Arc-length argument outside `[0, L]`.
    #[error("arc length {s} outside [0, {length}]")]
    ArcOutOfRange { s: f64, length: f64 },

    /// A tunable (node count, station count, window, grid, ...) is unusable.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// A domain value (coefficient, physical parameter, load) is unusable.
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// The requested boundary cannot be reached by a curve of the given length.
    #[error("infeasible boundary: chord {chord} exceeds arc length {length}")]
    InfeasibleBoundary { chord: f64, length: f64 },

    /// An iterative solver hit its iteration cap before meeting tolerance.
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    /// Too few samples for the requested fit.
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    /// A model was asked to serve a role it was not trained for.
    #[error("model role mismatch: {0}")]
    RoleMismatch(String),

    /// Training or evaluation data is malformed (NaN features, wrong widths).
    #[error("invalid data: {0}")]
    Data(String),

    /// The training loss became non-finite.
    #[error("training diverged: {0}")]
    Divergence(String),

    /// A persisted file declares a schema this build does not understand.
    #[error("schema version mismatch: expected {expected:?}, found {found:?}")]
    SchemaVersionMismatch { expected: String, found: String },

    /// A persisted record failed to parse; carries the 1-based line number.
    #[error("malformed record at line {line}: {message}")]
    MalformedRecord { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid_config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }

    pub fn invalid_params(msg: impl Into<String>) -> Self {
        Error::InvalidParams(msg.into())
    }
}
