use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("node {node}: alternative probabilities sum to {sum}, expected 1")]
    ProbabilitySum { node: usize, sum: f64 },

    #[error("node {node}: alternative probability {prob} is negative or not finite")]
    InvalidProbability { node: usize, prob: f64 },

    #[error("{kind} variable index {index} out of range (model declares {limit})")]
    VariableOutOfRange {
        kind: &'static str,
        index: usize,
        limit: usize,
    },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("expected {expected} bits, got {actual}")]
    WidthMismatch { expected: usize, actual: usize },

    #[error("invalid horizon: {0}")]
    InvalidHorizon(String),

    #[error("episode already finished; call reset first")]
    EpisodeFinished,

    #[error("action {action} out of range (store has {columns} columns)")]
    ActionOutOfRange { action: usize, columns: usize },

    #[error("time index {t} exceeds table horizon {t_max}")]
    TimeOutOfRange { t: u32, t_max: u32 },

    #[error("table too large: {0}")]
    TooLarge(String),

    #[error("metadata mismatch: {0}")]
    MetadataMismatch(String),

    #[error("malformed Q-table file, line {line}: {message}")]
    MalformedTable { line: usize, message: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
