use thiserror::Error;

use crate::model::Side;

/// Errors produced by the estimation and inference routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("no observations on the {0} side of the cutoff")]
    EmptySide(Side),
    #[error("outcome {value} at index {index} is outside [0, 1]")]
    OutOfRangeOutcome { index: usize, value: f64 },
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("radii must be finite, nonnegative and sorted (index {index})")]
    InvalidRadii { index: usize },
    #[error("Lipschitz constant must be finite and nonnegative, got {0}")]
    InvalidLipschitz(f64),
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("variance at index {index} is negative")]
    NegativeVariance { index: usize },
    #[error("anchor {value} outside [{lo}, {hi}]")]
    AnchorOutOfRange { value: f64, lo: f64, hi: f64 },
    #[error("problem of size {n} exceeds the limit of {max}")]
    TooLarge { n: usize, max: usize },
    #[error("number of simulations must be positive")]
    ZeroSims,
    #[error("sample is empty")]
    EmptySample,
    #[error("significance level must lie in (0, 1), got {0}")]
    InvalidAlpha(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
