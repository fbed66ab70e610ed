use thiserror::Error;

/// Errors produced by the coded demixing pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("length {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid factor graph: {0}")]
    InvalidGraph(String),

    #[error("check table line {line}: {msg}")]
    CheckTableParse { line: usize, msg: String },

    #[error("vacuous message: both inputs are identically zero")]
    VacuousMessage,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("AMP diverged at iteration {iteration}: {detail}")]
    Diverged { iteration: usize, detail: String },

    #[error("no sent messages (K = 0)")]
    NoMessages,

    #[error("trial {trial}: {source}")]
    Trial {
        trial: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
