use thiserror::Error;

use crate::integrate::IntegratorOutput;
use crate::solver::SolveReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unknown system `{0}` (expected logistic, memristor or lorenz)")]
    UnknownSystem(String),

    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },

    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),

    #[error("no convergence after {iterations} iterations (last residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("step size underflow at t = {t}")]
    MinStepReached {
        t: f64,
        partial: Box<IntegratorOutput>,
    },

    #[error("state overflow at step {step}")]
    Diverged { step: usize },

    #[error("pair is not critical: gradient norm {grad_norm:e} exceeds {tol:e}")]
    NotCritical { grad_norm: f64, tol: f64 },

    #[error("solver diverged; best objective {:e}", .0.objective)]
    Divergence(Box<SolveReport>),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
