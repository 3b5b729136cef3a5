use thiserror::Error;

/// Errors surfaced by the library. Contract violations indicate a caller
/// broke a documented precondition; the remaining variants are runtime
/// conditions a caller may want to recover from.
#[derive(Error, Debug)]
pub enum Error {
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("alphabet/level mismatch: left is (d={left_d}, time={left_time}, m={left_m}), right is (d={right_d}, time={right_time}, m={right_m})")]
    ShapeMismatch {
        left_d: usize,
        left_time: bool,
        left_m: usize,
        right_d: usize,
        right_time: bool,
        right_m: usize,
    },

    #[error("unsupported mode: {0}")]
    Unsupported(String),

    #[error("solution diverged on segment {segment} (t in [{t_start}, {t_end}])")]
    Divergence {
        segment: usize,
        t_start: f64,
        t_end: f64,
    },

    #[error("tree expansion budget exceeded: {required} branch words needed, limit is {limit}")]
    BudgetExceeded { required: f64, limit: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn contract(msg: impl Into<String>) -> Error {
    Error::Contract(msg.into())
}
