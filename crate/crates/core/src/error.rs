use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("quadrature did not converge after {evals} evaluations (error estimate {err_est:e})")]
    NonConvergent { evals: usize, err_est: f64 },

    #[error("integrand is not finite at x = {x}")]
    NonFiniteIntegrand { x: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported parameter regime: {0}")]
    UnsupportedRegime(String),

    #[error("moment matrix Q is singular or ill-conditioned (condition number {cond:e})")]
    SingularQ { cond: f64 },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("eta is not affine in theta (residual {residual:e})")]
    NotNaturalParameter { residual: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("too many failures: {failed} of {total} ({what})")]
    TooManyFailures {
        failed: usize,
        total: usize,
        what: String,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn regime(msg: impl Into<String>) -> Self {
        Error::UnsupportedRegime(msg.into())
    }
}
