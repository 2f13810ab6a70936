use thiserror::Error;

/// Errors produced by the estimation library.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied argument violated a precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Vector/matrix shapes do not agree.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// Quadrature did not reach the requested tolerance within the
    /// refinement budget.
    #[error("quadrature failed to converge: {0}")]
    Convergence(String),

    /// Step-size tuning could not place the acceptance probability in the
    /// target range.
    #[error("step-size tuning failed: {0}")]
    Tuning(String),

    /// No usable chains were available for estimation.
    #[error("all chains diverged")]
    AllChainsDiverged,

    /// Estimation preconditions were not met.
    #[error("estimation failed: {0}")]
    Estimation(String),

    /// SGD training produced a non-finite loss. The loss curve up to the
    /// failing step is preserved for inspection.
    #[error("training diverged at step {step}")]
    TrainingDiverged {
        step: usize,
        partial_curve: Vec<f64>,
    },

    /// An internal invariant failed; indicates a bug or an unexpected input
    /// the theory layer could not classify.
    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// A file did not match the expected binary layout.
    #[error("bad file format: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
