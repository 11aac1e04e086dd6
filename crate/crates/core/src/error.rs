use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("singular linear system")]
    SingularSystem,
    #[error("degenerate problem: {0}")]
    DegenerateProblem(String),
    #[error("every candidate pair has coincident inputs")]
    DegeneratePairs,
    #[error("functional gradient vanished")]
    ZeroGradient,
    #[error("line {line}, column {column}: {message}")]
    Ingest {
        line: usize,
        column: String,
        message: String,
    },
    #[error("model format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
