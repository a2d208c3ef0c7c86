use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied value violates a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The integrator produced a NaN or infinity.
    #[error("non-finite value at step {step}, cell {cell}")]
    NonFinite { step: u64, cell: usize },

    /// Configuration file or flag problem.
    #[error("config error: {0}")]
    Config(String),

    /// A regression was asked to fit data that spans too little range.
    #[error("insufficient range: {0}")]
    InsufficientRange(String),

    /// An iterative scheme failed its convergence criterion.
    #[error("no convergence: {0}")]
    NonConvergence(String),

    /// A statistic that must be positive was not.
    #[error("non-positive statistic: {0}")]
    NonPositive(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code used by the CLI for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidInput(_) => 2,
            Error::NonFinite { .. } => 3,
            _ => 1,
        }
    }
}
