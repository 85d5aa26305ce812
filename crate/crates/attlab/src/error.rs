use thiserror::Error;

/// Errors produced by the laboratory.
///
/// The CLI maps these onto process exit codes: usage errors → 2,
/// resource/cutoff errors → 3, invariant violations → 4.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Operand dimensions are incompatible.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A probability vector failed validation (negative weight, bad norm).
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    /// A truncation cutoff or sector budget was exceeded.
    #[error("resource limit: {0}")]
    Resource(String),

    /// A requested cutoff cannot satisfy the tail/completeness tolerance.
    #[error("cutoff too small: {0}")]
    Cutoff(String),

    /// The fixed-step integrator failed its step-halving convergence check.
    #[error("integrator did not converge: {0}")]
    Integrator(String),

    /// A mathematical identity that must hold was violated at runtime.
    #[error("invariant violation: {0}")]
    InvariantViolation(String),

    /// Bad command-line or config input (CLI layer only).
    #[error("usage error: {0}")]
    Usage(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) | Error::Domain(_) | Error::Shape(_)
            | Error::InvalidDistribution(_) => 2,
            Error::Resource(_) | Error::Cutoff(_) | Error::Integrator(_) => 3,
            Error::InvariantViolation(_) => 4,
        }
    }
}
