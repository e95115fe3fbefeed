use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A denominator `a - 1 - j` of the expansion coefficients vanishes.
    #[error("pole in expansion coefficients at j = {j} (a = {a})")]
    Pole { j: usize, a: f64 },

    #[error("series did not converge within {terms} terms (last term {last_term:e})")]
    NonConvergence { terms: usize, last_term: f64 },

    #[error("quadrature did not reach tolerance (estimate {value}, error {error:e})")]
    Quadrature { value: f64, error: f64 },

    /// The score is undefined: an observation sits exactly on μ while s < 1.
    #[error("score is singular: observation at the location parameter with s < 1")]
    SingularScore,

    #[error("degenerate sample: {0}")]
    Degenerate(String),
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
