use thiserror::Error;

/// Errors raised by the lab.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid set: {0}")]
    InvalidSet(String),

    #[error("projection has a continuum of nearest points")]
    DegenerateProjection,

    #[error("relaxation parameter {value} is invalid: {reason}")]
    InvalidLambda { value: f64, reason: &'static str },

    #[error("not a fixed point: step residual {residual:e} exceeds {tol:e}")]
    NotAFixedPoint { residual: f64, tol: f64 },

    #[error("cannot fit a rate from {available} usable residuals, need {required}")]
    InsufficientData { available: usize, required: usize },

    #[error("no admissible samples in the neighborhood")]
    EmptySample,

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
