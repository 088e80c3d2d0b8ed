use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("cell ({i}, {j}) has no connections (all face transmissivities are zero)")]
    IsolatedCell { i: usize, j: usize },

    #[error("zero diagonal entry at index {0}")]
    ZeroDiagonal(usize),

    #[error("matrix is not positive definite (pivot {index} = {pivot:e})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("operator is indefinite: p^T A p = {value:e} at iteration {iteration}")]
    Indefinite { iteration: usize, value: f64 },

    #[error("pure Neumann problem is singular; {0}")]
    PureNeumann(String),

    #[error("correlation matrix is not symmetric positive definite")]
    NotSpd,

    #[error("field format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}
