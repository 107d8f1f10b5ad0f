use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("cannot parse space descriptor `{input}`: {reason}")]
    SpaceParse { input: String, reason: String },

    #[error("enumeration budget exceeded: {needed} joint outcomes, cap is {cap}")]
    BudgetExceeded { needed: u128, cap: u128 },

    #[error("stopping rule or sequence defined on a different tree")]
    TreeMismatch,

    #[error("model is not conditionally symmetric: {0}")]
    NotSymmetric(String),

    #[error("b-out-of-range: b = {b} must lie in (0, {upper})")]
    BOutOfRange { b: f64, upper: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("partition does not align with the driver grid: {0}")]
    GridMismatch(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
