use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("stencil for `{field}` touches its singular set at distance {distance:.3e} (step {step:.3e})")]
    StencilOnSingularity {
        field: String,
        distance: f64,
        step: f64,
    },

    #[error("unknown field `{0}`")]
    UnknownField(String),

    #[error("shrinkage estimator evaluated at the origin")]
    ShrinkageSingularity,

    #[error("observation is missing the `{0}` statistic")]
    MissingStatistic(&'static str),

    #[error("marginal must be positive, got m(x) = {0}")]
    InvalidMarginal(f64),

    #[error("domain error: {0}")]
    DomainError(String),

    #[error("design matrix has rank {rank} < {columns} columns")]
    RankDeficient { rank: usize, columns: usize },

    #[error("ridge penalty must be nonnegative, got {0}")]
    InvalidPenalty(f64),

    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("too many singular draws at replication {index} ({attempts} attempts)")]
    RejectionLimit { index: u64, attempts: u32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for the measure-zero events a Monte Carlo driver may redraw.
    pub fn is_singular_draw(&self) -> bool {
        matches!(
            self,
            Error::ShrinkageSingularity | Error::StencilOnSingularity { .. }
        )
    }
}
