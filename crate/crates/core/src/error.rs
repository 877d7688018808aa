use thiserror::Error;

/// Errors produced by the estimators and their supporting machinery.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum PmmError {
    #[error("input too short: need at least {needed} observations, got {got}")]
    InputTooShort { needed: usize, got: usize },

    #[error("degenerate moments: {0}")]
    DegenerateMoments(String),

    #[error("inadmissible cumulants: {0}")]
    InadmissibleCumulants(String),

    #[error("degenerate distribution: m4 - m2^2 = {0} is not positive")]
    DegenerateDistribution(f64),

    #[error("singular design matrix")]
    SingularDesign,

    #[error("invalid model order: {0}")]
    InvalidOrder(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{failed} of {total} replicates failed to fit")]
    TooManyFailures { failed: usize, total: usize },

    #[error("optimization failed: {0}")]
    Optimization(String),
}

pub type Result<T> = std::result::Result<T, PmmError>;
