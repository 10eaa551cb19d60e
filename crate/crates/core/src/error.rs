use std::fmt;

/// Errors produced by dataset handling, tree (de)serialization, and
/// optimizer configuration checks.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Malformed input at a given 1-based line.
    Parse { line: usize, message: String },
    /// Input contained no usable records.
    EmptyInput,
    /// A dataset invariant does not hold (shape mismatch, label out of
    /// range, fewer than two classes).
    InvalidDataset(String),
    /// Split fractions or sizes are unusable for the given dataset.
    InvalidSplit(String),
    /// A configuration value is out of its documented range.
    InvalidConfig(String),
    /// A tree violates its structural invariants.
    InvalidTree(String),
    /// An encoded tree has the wrong shape for its depth.
    InvalidEncoding(String),
    /// Two encodings with different depths were combined.
    DepthMismatch { left: usize, right: usize },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Parse { line, message } => write!(f, "parse error at line {line}: {message}"),
            Error::EmptyInput => write!(f, "input contains no records"),
            Error::InvalidDataset(msg) => write!(f, "invalid dataset: {msg}"),
            Error::InvalidSplit(msg) => write!(f, "invalid split: {msg}"),
            Error::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
            Error::InvalidTree(msg) => write!(f, "invalid tree: {msg}"),
            Error::InvalidEncoding(msg) => write!(f, "invalid encoding: {msg}"),
            Error::DepthMismatch { left, right } => {
                write!(f, "encoding depth mismatch: {left} vs {right}")
            }
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;
