use thiserror::Error;

use crate::fock::ModeLabel;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid truncation: {0}")]
    InvalidTruncation(String),

    #[error("truncation too small for {context}: norm deficit {deficit:.3e} exceeds budget {budget:.3e}")]
    TruncationTooSmall { context: String, deficit: f64, budget: f64 },

    #[error("basis mismatch: {0}")]
    BasisMismatch(String),

    #[error("reduced basis of dimension {dim} exceeds the configured limit {limit}")]
    DimensionOverflow { dim: usize, limit: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("quantity undefined: {0}")]
    Undefined(String),

    #[error("matrix is not a density matrix: minimum eigenvalue {min_eigenvalue:.3e}")]
    NotAState { min_eigenvalue: f64 },

    #[error("norm drift {drift:.3e} exceeds {tol:.1e} at tau = {time}")]
    NormDrift { drift: f64, tol: f64, time: f64 },

    #[error(
        "leakage {leakage:.3e} in the {mode} mode exceeds {tol:.1e} at tau = {time}; \
         try cutoffs (pump, signal, idler) = {suggested:?}"
    )]
    LeakageExceeded {
        mode: ModeLabel,
        leakage: f64,
        tol: f64,
        time: f64,
        suggested: [usize; 3],
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("Gamma function pole at argument {argument} ({context})")]
    GammaPole { argument: f64, context: String },

    #[error("series failed to converge: {0}")]
    ConvergenceFailure(String),

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error("complementary entropies disagree: {left} vs {right}")]
    EntropyMismatch { left: f64, right: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
