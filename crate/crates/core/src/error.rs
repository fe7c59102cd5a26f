use thiserror::Error;

use crate::model::PointId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("coordinate {value} on axis {axis} is outside [1, {delta}]")]
    OutOfBox { axis: usize, value: i64, delta: i64 },

    #[error("point is not stored")]
    NotFound,

    #[error("record {0} is not a member of level {1}")]
    NotAMember(PointId, usize),

    #[error("structure is empty")]
    Empty,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("instance of size {size} exceeds the brute-force guard of {guard}")]
    GuardExceeded { size: usize, guard: usize },

    #[error("no level has at most {k} members; the family is not well formed")]
    Degenerate { k: usize },

    #[error("internal state inconsistent: {0}")]
    Inconsistent(String),
}
