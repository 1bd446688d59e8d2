use thiserror::Error;

pub type Result<T> = std::result::Result<T, SampError>;

#[derive(Debug, Error)]
pub enum SampError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("duplicate signal poles at components {0} and {1}")]
    DuplicatePoles(usize, usize),

    #[error("pencil parameter {l} out of range for {n} samples")]
    PencilOutOfRange { l: usize, n: usize },

    #[error("decomposition failed: {0}")]
    Decomposition(String),

    #[error("matrix is numerically singular (condition number {0:.3e})")]
    IllConditioned(f64),

    #[error("{0}")]
    Flagged(String),

    #[error("malformed input at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl SampError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        SampError::InvalidArgument(msg.into())
    }
}
