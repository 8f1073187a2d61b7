use thiserror::Error;

/// Errors raised by the region evaluators, searches and simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("description count L={0} out of range (1..={1})")]
    DescriptionCount(usize, usize),

    #[error("width W={w} out of range for L={l}")]
    Width { w: usize, l: usize },

    #[error("invalid description set: {0}")]
    InvalidSet(String),

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("duplicate variable `{0}`")]
    DuplicateVariable(String),

    #[error("variable sets overlap: {0}")]
    Overlap(String),

    #[error("empty variable set")]
    EmptySet,

    #[error("distribution not normalized: sum={0}")]
    NotNormalized(f64),

    #[error("negative or non-finite probability at index {idx}: {value}")]
    BadProbability { idx: usize, value: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("scheme mismatch: {0}")]
    Scheme(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("linear program is unbounded")]
    Unbounded,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite objective value")]
    NonFinite,

    #[error("limit exceeded: {0}")]
    Limit(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
