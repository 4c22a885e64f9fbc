use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum PevoError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("grid mismatch: operands live on different grids")]
    GridMismatch,
    #[error("non-finite value in {context}")]
    NonFinite { context: String },
    #[error("quadrature failed to converge: {0}")]
    Quadrature(String),
    #[error("derivative unavailable: {0}")]
    Derivative(String),
    #[error("h too small: {detail} (increase h)")]
    HTooSmall { detail: String },
    #[error("grid too small for this cfg: {0}")]
    GridTooSmall(String),
    #[error("exponential weight overflow: rho*<xi_max>^(1/theta) = {exponent:.3} exceeds 690")]
    WeightOverflow { exponent: f64 },
    #[error("linear solve breakdown at t = {t}: {detail}")]
    SolveBreakdown { t: f64, detail: String },
    #[error("overflow in channel {channel} at t = {t}")]
    Overflow { channel: String, t: f64 },
    #[error("assumption violated: {0}")]
    Assumption(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, PevoError>;
