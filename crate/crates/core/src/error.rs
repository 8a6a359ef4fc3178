use thiserror::Error;

/// Errors raised by the solvers.
///
/// Variants fall into three families that callers (notably the CLI) map to
/// distinct exit codes: violated hypotheses or bad configuration, numerical
/// non-convergence, and everything else.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// A structural assumption on the problem data does not hold, e.g. a
    /// negative weight or a nonlinearity outside the requested regime.
    #[error("hypothesis {hypothesis} violated: {detail}")]
    Hypothesis {
        hypothesis: &'static str,
        detail: String,
    },

    #[error("mesh mismatch: expected {expected} nodes, got {got}")]
    MeshMismatch { expected: usize, got: usize },

    #[error("no convergence after {iterations} iterations (last change {last_change:e})")]
    NonConvergence {
        iterations: usize,
        last_change: f64,
        last_iterate: Vec<f64>,
    },

    #[error("monotonicity violated by {violation:e} at iteration {iteration}")]
    Monotonicity { iteration: usize, violation: f64 },

    #[error("degenerate point: {0}")]
    Degenerate(String),

    #[error("integration failed at x = {x}: {reason}")]
    Integration { x: f64, reason: String },

    #[error("no sign change of u before x = {x_max}")]
    Horizon { x_max: f64 },

    #[error("transversality lost: |u'(z)| = {0:e}")]
    Transversality(f64),

    #[error("scaling check failed: residuals {residuals:?}")]
    Scaling { residuals: Vec<(f64, f64)> },
}

impl Error {
    pub(crate) fn hypothesis(hypothesis: &'static str, detail: impl Into<String>) -> Self {
        Error::Hypothesis {
            hypothesis,
            detail: detail.into(),
        }
    }

    /// True for errors that describe bad input rather than a numerical failure.
    pub fn is_hypothesis_violation(&self) -> bool {
        matches!(
            self,
            Error::Domain(_) | Error::Config(_) | Error::Hypothesis { .. } | Error::MeshMismatch { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
