use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    /// A malformed structure-constant entry or file field.
    #[error("structural error: {0}")]
    Structural(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("metric is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("degenerate plane spanned by e_{i} and e_{j} (area {area:e})")]
    DegeneratePlane { i: usize, j: usize, area: f64 },

    /// The flow left the cone of positive-definite metrics or the step size collapsed.
    #[error("flow breakdown at t = {t}: {reason}")]
    FlowBreakdown { t: f64, reason: String },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("window [{lo}, {hi}] is not covered by the trajectory span [{t0}, {t1}]")]
    Window { lo: f64, hi: f64, t0: f64, t1: f64 },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Structural(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
