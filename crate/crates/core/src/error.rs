use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid mismatch: {left} vs {right}")]
    GridMismatch { left: String, right: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("singular linear system: {0}")]
    Singular(String),

    /// Newton iteration did not reach its tolerance.
    #[error("{context}: no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        context: &'static str,
        iterations: usize,
        residual: f64,
        last_iterate: Option<Vec<f64>>,
    },

    #[error("solve failed at alpha = {alpha:e}: {source}")]
    AlphaPath {
        alpha: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("alpha0 below discrepancy threshold: discrepancy {discrepancy:e} <= tau*delta^kappa = {threshold:e}")]
    StartCondition { discrepancy: f64, threshold: f64 },

    #[error("discrepancy threshold {threshold:e} not reached within {steps} steps")]
    ThresholdNotReached { threshold: f64, steps: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for failures of an iterative or direct solve.
    pub fn is_solver_failure(&self) -> bool {
        match self {
            Error::Singular(_)
            | Error::NoConvergence { .. }
            | Error::StartCondition { .. }
            | Error::ThresholdNotReached { .. } => true,
            Error::AlphaPath { source, .. } => source.is_solver_failure(),
            _ => false,
        }
    }
}
