use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid bounds: {0}")]
    InvalidBounds(String),

    #[error("non-finite value {0} rejected")]
    NonFinite(f64),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("point lies outside the unit cube at coordinate {index}: {value}")]
    OutOfBounds { index: usize, value: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("evaluation budget exhausted: {requested} requested, {remaining} remaining")]
    BudgetExhausted { requested: usize, remaining: usize },

    #[error("surrogate needs at least {needed} training points, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("Cholesky factorization failed even with jitter {jitter:e}")]
    Factorization { jitter: f64 },

    #[error("all acquisition scores are NaN")]
    AllNan,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension {dim} exceeds the Sobol direction table (max {max})")]
    SobolDimension { dim: usize, max: usize },

    #[error("malformed direction-number table at line {line}: {reason}")]
    SobolTable { line: usize, reason: String },

    #[error("too few successful fantasies: {ok} of {wanted}")]
    Fantasy { ok: usize, wanted: usize },

    #[error("no unevaluated candidates could be generated")]
    NoCandidates,

    #[error("strategy {0} is not implemented")]
    Unimplemented(String),

    #[error("evaluation failed: {0}")]
    Evaluation(String),

    #[error("evaluation timed out after {0:?}")]
    Timeout(std::time::Duration),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
