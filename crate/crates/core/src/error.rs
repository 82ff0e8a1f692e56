use thiserror::Error;

/// Errors raised by the allocation, leverage and oracle routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is singular or not positive definite (condition number {condition:.3e})")]
    Singular { condition: f64 },

    /// A log-barrier objective was evaluated outside its domain. `quad_form` is the
    /// offending wᵀΣw so a line search can tell how far out the step landed.
    #[error("log-domain violation: argument {argument:.6e} <= 0 at quadratic form {quad_form:.6e}")]
    LogDomain { argument: f64, quad_form: f64 },

    #[error("variance moment undefined: requires {bound}")]
    MomentUndefined { bound: String },

    #[error("risk-seeking gamble: certainty equivalent {ce} is not below the mean {mean}")]
    RiskSeeking { ce: f64, mean: f64 },

    #[error("certainty equivalent infeasible for {family} family")]
    CeInfeasible { family: &'static str },

    #[error("closed form unavailable ({0}); use solve_numeric")]
    ClosedFormUnavailable(&'static str),

    #[error("solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    NotConverged {
        iterations: usize,
        residual: f64,
        best: Vec<f64>,
    },

    #[error("quadrature did not converge (error estimate {estimate:.3e})")]
    Quadrature { estimate: f64 },

    #[error("integral diverges: {0}")]
    Divergent(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
