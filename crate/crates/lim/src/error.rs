//! Error type shared by the whole crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("unknown built-in problem `{0}` (expected one of: ex1, ex2, ex3)")]
    UnknownProblem(String),

    #[error("problem validation failed: {0}")]
    Validation(String),

    #[error("root refinement for the {n}-point rule failed: {detail}")]
    RootRefinement { n: usize, detail: String },

    #[error("tableau consistency check failed for (k={k}, s={s}): {detail}")]
    TableauCheck { k: usize, s: usize, detail: String },

    #[error(
        "solver did not converge after {iterations} iterations \
         (last increment {residual:.3e}); the step size is likely too large"
    )]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("singular preconditioner: {0}")]
    SingularPreconditioner(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("step {step} failed: {source}")]
    StepFailed {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(
        "reference self-check failed: halving the reference step changed the \
         trajectory by {max_diff:.3e} (limit {limit:.1e})"
    )]
    ReferenceSelfCheck { max_diff: f64, limit: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for the CLI: 1 for usage/config errors, 2 for
    /// numerical failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::InvalidParameter(_)
            | Error::DimensionMismatch(_)
            | Error::UnknownProblem(_)
            | Error::Validation(_)
            | Error::Config(_)
            | Error::Io(_) => 1,
            Error::RootRefinement { .. }
            | Error::TableauCheck { .. }
            | Error::NonConvergence { .. }
            | Error::SingularPreconditioner(_)
            | Error::NonFinite(_)
            | Error::StepFailed { .. }
            | Error::ReferenceSelfCheck { .. } => 2,
        }
    }
}
