use thiserror::Error;

/// Errors raised by geometry construction, measure evaluation, the dual solver
/// and the inference pipeline.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("exact geometry is only available for d <= 2 (got d = {0})")]
    UnsupportedExactDimension(usize),

    #[error("exact geometry requires an interval (d = 1) or convex polygon (d = 2) support")]
    NonPolygonalSupport,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("diagram was not built against this measure's support")]
    NotBuiltAgainstSupport,

    #[error("facet ({0}, {1}) is empty")]
    EmptyFacet(usize, usize),

    #[error("reference measure has no sampler (custom density without a sup-norm bound)")]
    NoSampler,

    #[error("weights are not in the interior of the simplex (weight {index} is {value})")]
    NotInterior { index: usize, value: f64 },

    #[error("dual solver did not converge in {iterations} iterations (gradient norm {gradient_norm:e})")]
    MaxIterationsExceeded { iterations: usize, gradient_norm: f64 },

    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(String),

    #[error("cell {0} has zero mass")]
    EmptyCell(usize),

    #[error("reduced Hessian is singular")]
    SingularHessian,

    #[error("covariance matrix is not positive semidefinite (min eigenvalue {0:e})")]
    NotPsd(f64),

    #[error("no draws to compute a quantile from")]
    EmptyDraws,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
