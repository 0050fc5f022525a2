use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    /// Gram-Schmidt left nothing of the row after projecting out earlier rows.
    #[error("row {row} is linearly dependent on earlier rows")]
    DegenerateRow { row: usize },

    #[error("component {component} of mode {mode} collapsed during orthogonalization")]
    DegenerateComponent { mode: usize, component: usize },

    #[error("posterior variance of component {component} is not positive ({value})")]
    DegenerateVariance { component: usize, value: f64 },

    #[error("sigma optimization failed: {0}")]
    OptimizationFailed(String),

    #[error("trajectory diverged at step {step} (|x| = {value})")]
    Divergence { step: usize, value: f64 },

    #[error("internal numerical error: {0}")]
    Internal(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    /// True for failures that stem from degenerate numerics rather than bad input or I/O.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFinite(_)
                | Error::DegenerateRow { .. }
                | Error::DegenerateComponent { .. }
                | Error::DegenerateVariance { .. }
                | Error::OptimizationFailed(_)
                | Error::Divergence { .. }
                | Error::Internal(_)
        )
    }
}
