use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("no feasible agent: every objective value is +inf")]
    NoFeasibleAgent,

    #[error("objective returned NaN for agent {agent} at iteration {iteration}")]
    NanObjective { agent: usize, iteration: usize },

    #[error(
        "initialization failed for agent {agent} after {attempts} draws; \
         the initial distribution is not supported inside the feasible set"
    )]
    InitializationFailed { agent: usize, attempts: usize },

    #[error("unknown objective `{0}`")]
    UnknownObjective(String),

    #[error("unknown algorithm `{0}`")]
    UnknownAlgorithm(String),

    #[error("ε = {epsilon} is not below the envelope supremum; the sub-level set is unbounded")]
    UnboundedSublevelSet { epsilon: f64 },

    #[error("mismatched comparison basis: {0}")]
    MismatchedBasis(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
