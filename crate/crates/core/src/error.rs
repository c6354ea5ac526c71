use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is singular to working precision")]
    SingularMatrix,
    #[error("matrix has column rank {rank}, need {needed}")]
    RankDeficient { rank: usize, needed: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },
    #[error("{path}: bad magic number {found} (expected {expected})")]
    BadMagic { path: PathBuf, expected: u32, found: u32 },
    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("batch size {m} is not in 1..={population}")]
    BadBatchSize { m: usize, population: usize },
    #[error("operation requires a {expected} sampler, got {actual}")]
    WrongMode { expected: &'static str, actual: &'static str },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("search direction has zero length")]
    ZeroDirection,
    #[error("invalid interval [{a}, {b}]")]
    BadInterval { a: f64, b: f64 },
    #[error("expected a {expected} model")]
    WrongKind { expected: &'static str },
    #[error("empty input")]
    EmptyInput,

    #[error("config: {0}")]
    Config(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
