//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("linear solver did not converge: residual {residual:.3e} after {iterations} iterations (tolerance {tolerance:.3e})")]
    SolverDiverged {
        residual: f64,
        iterations: usize,
        tolerance: f64,
        /// Relative residual after each restart cycle.
        history: Vec<f64>,
    },

    #[error("mesh rejected by solver: {0}")]
    BadMesh(String),

    #[error("minimization failed: {0}")]
    Minimization(String),

    #[error("unstable configuration: {0}")]
    Unstable(String),

    #[error("empty ensemble: all {lost} shots lost ({breakdown})")]
    EmptyEnsemble { lost: usize, breakdown: String },

    #[error("degenerate sample set: {0}")]
    DegenerateData(String),

    #[error("{0}")]
    Other(String),
}

pub type CoreResult<T> = Result<T, CoreError>;
