use thiserror::Error;

/// Errors produced by solvers, schemes and the run harness.
#[derive(Debug, Error)]
pub enum SimError {
    /// Invalid configuration or incompatible option combination.
    #[error("configuration error: {0}")]
    Config(String),

    /// An iterative linear solver did not reach the requested tolerance.
    #[error("linear solver did not converge: residual {residual:.3e} after {iterations} iterations")]
    SolverDiverged { residual: f64, iterations: usize },

    /// Conjugate gradient hit a direction of non-positive curvature.
    #[error("conjugate gradient breakdown: curvature {curvature:.3e}")]
    CgBreakdown { curvature: f64 },

    /// A field or trajectory stopped being finite, or positivity was lost.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Filesystem problems while writing run output.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SimError>;
