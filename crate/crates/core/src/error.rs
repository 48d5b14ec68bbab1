use thiserror::Error;

/// Errors produced by the verification pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension {0}: expected an integer >= 2")]
    InvalidDimension(usize),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("matrix trace {0} differs from 1")]
    NotUnitTrace(f64),

    #[error("matrix is not positive semidefinite (min eigenvalue {0:.3e})")]
    NotPositive(f64),

    #[error("invalid POVM: {0}")]
    InvalidPovm(String),

    #[error("invalid witness: {0}")]
    InvalidWitness(String),

    #[error("bipartite structure error: {0}")]
    Structure(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{solver} did not converge after {iterations} iterations (best objective {best_value})")]
    NonConvergence {
        solver: &'static str,
        iterations: usize,
        best_value: f64,
    },

    #[error("degenerate integration region: {0}")]
    DegenerateRegion(String),

    #[error("no feasible starting state found after {0} attempts")]
    InfeasibleRegion(usize),
}

pub type Result<T> = std::result::Result<T, Error>;
