use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("degenerate segment {index}: length {length:e}")]
    DegenerateSegment { index: usize, length: f64 },

    #[error("singular system: pivot {pivot:e} at row {row} (threshold {threshold:e})")]
    SingularSystem { row: usize, pivot: f64, threshold: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("initial curve violates segment guard: min segment {min_len:e} < tol {tol:e}")]
    DegenerateInitialCurve { min_len: f64, tol: f64 },

    #[error("problem `{0}` has no exact solution")]
    MissingExactSolution(String),

    #[error("radius reached {radius:e} at t = {time}")]
    BlowDown { time: f64, radius: f64 },

    #[error("nonpositive error value {value:e} at index {index}")]
    NonPositiveError { index: usize, value: f64 },

    #[error("run aborted at step {step} (t = {time}): min segment {min_len:e} < tol {tol:e}")]
    Aborted {
        step: usize,
        time: f64,
        min_len: f64,
        tol: f64,
    },
}
