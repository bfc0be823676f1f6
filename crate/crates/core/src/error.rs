use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("unknown link type `{0}`")]
    UnknownLinkType(String),
    #[error("line {line}: {msg}")]
    EdgeRecord { line: usize, msg: String },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("integer overflow in sparse product")]
    Overflow,
    #[error("meta-path syntax error: {0}")]
    MetaPathSyntax(String),
    #[error("meta-path type error: {0}")]
    MetaPathType(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dataset has no observed samples")]
    NoObservedSamples,
    #[error("zero hazard increment at observed event {index} (unresolved tie)")]
    ZeroHazardIncrement { index: usize },
    #[error("objective is not finite (diverging coefficients; standardize the features)")]
    NonFiniteObjective,
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
