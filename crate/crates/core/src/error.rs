use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("instance parse error at token {token}: {msg}")]
    Parse { token: usize, msg: String },

    #[error("pattern violation: {0}")]
    Pattern(#[from] crate::model::PatternViolation),

    /// A type with positive demand is not covered by any column.
    #[error("infeasible master problem: demanded type {type_index} is not covered by any column")]
    Infeasible { type_index: usize },

    #[error("simplex did not converge within {pivots} pivots")]
    NumericFailure { pivots: usize },

    #[error("cannot estimate a distribution from an empty memory window")]
    EmptyWindow,

    #[error("exact solver accepts at most {limit} items, got {n}")]
    SizeGuard { n: usize, limit: usize },

    #[error("invalid distribution spec: {0}")]
    InvalidSpec(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
