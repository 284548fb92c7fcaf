//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MmcError {
    /// Rejected argument or malformed domain object.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Malformed data file; `line` is 1-based and counts every line read,
    /// including the header.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// The Jacobi SVD sweep limit was reached before the off-diagonal mass
    /// fell below tolerance. Does not occur for finite inputs of sane scale.
    #[error("svd did not converge within {sweeps} sweeps")]
    SvdNoConvergence { sweeps: usize },

    /// ADMM hit `max_iters` with the stopping criteria unmet. Carries the
    /// final residual norms so callers can report partial diagnostics.
    #[error(
        "lpav admm stopped at max_iters={iterations} with primal residual \
         {primal:.3e} and dual residual {dual:.3e}"
    )]
    AdmmNoConvergence {
        iterations: usize,
        primal: f64,
        dual: f64,
    },

    /// Training error blew past the divergence guard.
    #[error(
        "divergence at iteration {iteration}: train rmse {train_rmse:.3e} \
         exceeds {limit:.1e}; retry with a smaller step size eta"
    )]
    Divergence {
        iteration: usize,
        train_rmse: f64,
        limit: f64,
    },

    /// Failure inside the link-estimation step of an outer solver iteration.
    #[error("link fit failed at outer iteration {iteration}: {source}")]
    LinkFitAtIteration {
        iteration: usize,
        #[source]
        source: Box<MmcError>,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, MmcError>;

impl MmcError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        MmcError::InvalidInput(msg.into())
    }
}
