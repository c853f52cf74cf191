use thiserror::Error;

#[derive(Debug, Error)]
pub enum TraceLabError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("mesh construction failed at cell {cell}: {reason}")]
    Construction { cell: usize, reason: String },

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("unsupported entity: {0}")]
    Unsupported(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("linear solver failure: {0}")]
    Solver(String),

    #[error("matrix is not symmetric positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("chart overlap too thin: mesh size h = {h} exceeds h0 = {h0}")]
    ChartOverlap { h: f64, h0: f64 },

    #[error("malformed artifact {path}: {reason}")]
    Artifact { path: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = TraceLabError> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> TraceLabError {
    TraceLabError::InvalidArgument(msg.into())
}
