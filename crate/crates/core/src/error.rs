use thiserror::Error;

/// Errors raised by the simulation and sampling layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("mismatched truncation: {left} vs {right}")]
    MismatchedNMax { left: usize, right: usize },

    #[error("truncation must be at least 1, got {0}")]
    InvalidNMax(usize),

    #[error("expected {expected} coefficients, got {got}")]
    CoefficientCount { expected: usize, got: usize },

    #[error("mode {mode} outside truncation |n| <= {n_max}")]
    ModeOutOfRange { mode: i64, n_max: usize },

    #[error("non-finite coefficient at mode {0}")]
    NonFinite(i64),

    #[error("field is not Hermitian at mode {0}")]
    NotHermitian(i64),

    #[error("negative power {0} for |d/dx|")]
    NegativePower(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("kappa = {0} must be positive for the Gibbs measure")]
    NonPositiveKappa(f64),

    #[error("integrator failure at step {step}: {reason}")]
    Integrator { step: usize, reason: String },

    #[error("sample {index} (seed {seed}) failed: {source}")]
    Sample {
        index: usize,
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("internal consistency defect: {0}")]
    Defect(String),

    #[error("{0}")]
    InsufficientData(String),
}

pub type Result<T> = std::result::Result<T, Error>;
