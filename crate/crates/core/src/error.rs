//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("record error at line {line}: {message}")]
    Record { line: usize, message: String },

    #[error("{count} record error(s) in strict mode, first at line {first_line}: {first_message}")]
    StrictParse {
        count: usize,
        first_line: usize,
        first_message: String,
    },

    #[error("record at {timestamp} predates the anchor {anchor}")]
    BeforeAnchor { timestamp: String, anchor: String },

    #[error("degenerate week {week}: {reason}")]
    DegenerateWeek { week: usize, reason: String },

    #[error("feature alignment gaps: {missing:?}")]
    Alignment { missing: Vec<(usize, String)> },

    #[error("missing {kind} data for week {week}")]
    MissingSeries { kind: String, week: usize },

    #[error("insufficient history: need {needed}, have {available}")]
    InsufficientHistory { needed: usize, available: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("zero variance: {0}")]
    ZeroVariance(String),

    #[error("non-finite loss at epoch {epoch}: try a smaller learning rate (current {lr})")]
    NonFiniteLoss { epoch: usize, lr: f64 },

    #[error("model file error: {0}")]
    ModelFile(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}
