use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not square: row {row} has {len} entries, expected {expected}")]
    NonSquare {
        row: usize,
        len: usize,
        expected: usize,
    },

    #[error("asymmetry at ({i}, {j}) is {deviation:e}, tolerance is {tolerance:e}")]
    AsymmetryExceedsTolerance {
        i: usize,
        j: usize,
        deviation: f64,
        tolerance: f64,
    },

    #[error("diagonal entry {i} is {value:e}, tolerance is {tolerance:e}")]
    NonzeroDiagonal { i: usize, value: f64, tolerance: f64 },

    #[error("entry ({i}, {j}) is not finite")]
    NonFiniteEntry { i: usize, j: usize },

    #[error("point {index} has dimension {got}, expected {expected}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        got: usize,
    },

    #[error("no points provided")]
    EmptyInput,

    #[error("coefficient vector has length {got}, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("coefficients sum to {sum:e}, expected zero")]
    NonZeroSum { sum: f64 },

    #[error("cluster {0} is empty")]
    EmptyCluster(usize),

    #[error("index {index} out of range for {len} items")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("beta must be non-negative, got {0}")]
    NegativeBeta(f64),

    #[error("lazy increment needs a negative distance, got {0}")]
    NonNegativeInput(f64),

    #[error("coefficient norm is zero")]
    ZeroNorm,

    #[error("eigenvalue iteration did not converge within {iterations} iterations")]
    ConvergenceFailure { iterations: usize },

    #[error("requested {clusters} clusters for {points} points")]
    TooManyClusters { clusters: usize, points: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        column: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
