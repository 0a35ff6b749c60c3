use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("mode grid has a node at k = 0 (mode {0})")]
    SingularMode(usize),

    #[error("unsupported dispersion: {0}")]
    UnsupportedDispersion(String),

    #[error("unsupported grid: {0}")]
    UnsupportedGrid(String),

    #[error("incompatible grid: {0}")]
    IncompatibleGrid(String),

    #[error("incompatible caps: {0}")]
    IncompatibleCaps(String),

    #[error("empty spectral subspace: {0}")]
    EmptySubspace(String),

    #[error("no convergence after {iterations} iterations (worst residual {residual:.3e}, tol {tol:.1e})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        tol: f64,
    },

    #[error("krylov step failed at t = {t}: {reason}")]
    KrylovBreakdown { t: f64, reason: String },

    #[error("precondition violated: {0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
