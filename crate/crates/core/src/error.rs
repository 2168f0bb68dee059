use thiserror::Error;

/// Errors raised by the sampling, spectral and verification layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("covariance matrix not positive definite (smallest pivot {pivot:e} at index {index})")]
    NotPositiveDefinite { pivot: f64, index: usize },

    #[error("circulant embedding has negative eigenvalue {min:e} (max {max:e})")]
    NegativeEmbedding { min: f64, max: f64 },

    #[error("eigensolver did not converge for eigenvalue {index} (residual {residual:e})")]
    NoConvergence { index: usize, residual: f64 },

    #[error("degenerate spectrum: minimal spacing {spacing:e}")]
    DegenerateSpectrum { spacing: f64 },

    #[error("spacing is undefined for a single eigenvalue")]
    UndefinedSpacing,

    #[error("Newton iteration did not converge after {iterations} steps (last iterate {last})")]
    NewtonDivergence { iterations: usize, last: num_complex::Complex64 },

    #[error("characteristic root left the upper half-plane at {0}")]
    BranchError(num_complex::Complex64),

    #[error("moment sequence lost Hankel positivity (smallest eigenvalue {0:e})")]
    Instability(f64),

    #[error("insufficient resolution: {0}")]
    Resolution(String),

    #[error("degenerate linear combination: variance {0:e}")]
    DegenerateCombination(f64),

    #[error("empty input: {0}")]
    Empty(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;
