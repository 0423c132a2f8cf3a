use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("instance has no cards")]
    EmptyInstance,
    #[error("duplicate value {0} in instance")]
    DuplicateValue(f64),
    #[error("non-finite value {0} in instance")]
    NonFiniteValue(f64),
    #[error("size mismatch: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("arrival time {0} outside (0, 1]")]
    InvalidTime(f64),
    #[error("duplicate arrival time {0}")]
    DuplicateTime(f64),
    #[error("not a permutation")]
    InvalidPermutation,
    #[error("rank query needs i >= 1 and j >= 1, got ({i}, {j})")]
    RankZero { i: usize, j: usize },
    #[error("pair structure window {got} does not match query window {expected}")]
    WindowMismatch { expected: usize, got: usize },
    #[error("invalid pair structure: {0}")]
    InvalidPairs(String),
    #[error("threshold schedule must be non-increasing within [0, 1]: {0}")]
    InvalidSchedule(String),
    #[error("argument out of domain: {0}")]
    Domain(String),
    #[error("instance too large for exact enumeration: n = {n}, limit {limit}")]
    TooLarge { n: usize, limit: usize },
    #[error("stopping ratio undefined at a + b = {0}: Pr[S = a + b] = 0 but Pr[S = a + b + 1] > 0")]
    UndefinedRatio(usize),
    #[error("accept set is not monotone at (a, b) = ({a}, {b})")]
    NonMonotone { a: usize, b: usize },
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
