use thiserror::Error;

/// Errors produced by the estimation pipeline.
#[derive(Debug, Error)]
pub enum EchtError {
    /// A precondition on an argument or configuration was violated.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The requested design collapses numerically (unstable filter, filter
    /// that removes the target tone, ...).
    #[error("degenerate design: {0}")]
    DegenerateDesign(String),

    /// The requested feature is recognised but not implemented.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// An iterative numerical procedure failed its convergence check.
    #[error("no convergence: {0}")]
    NonConvergence(String),

    /// No spectral peak cleared the prominence gate inside the search band.
    #[error("no spectral peak found: {0}")]
    NoPeak(String),

    /// Reading or writing an external artefact failed.
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for EchtError {
    fn from(e: std::io::Error) -> Self {
        EchtError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, EchtError>;
