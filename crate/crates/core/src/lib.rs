//! Gamma generalized normal (GGN) distribution.
//!
//! The GGN family composes the gamma-G generator with the generalized normal
//! baseline: if `G` is a GN cdf then `F(x) = P(a, -ln(1 - G(x)))`, with `P` the
//! regularized lower incomplete gamma function.
//!
//! Modules, bottom up:
//! - [`specfun`]: gamma family, incomplete gamma, quantiles, digamma.
//! - [`quadrature`]: adaptive Gauss-Kronrod integration used by oracles.
//! - [`gn`], [`ggn`]: densities, distribution functions, quantiles.
//! - [`series`]: the exponentiated-GN expansion and the moment series.
//! - [`sampling`]: reproducible streams and the inverse-transform sampler.
//! - [`estimation`]: log-likelihood, score, maximum likelihood fits.
//! - [`gof`]: divergences, EDF statistics, information criteria.
//! - [`study`]: replicated generate/fit/aggregate Monte Carlo runs.

// `!(x > 0.0)` rejects NaN along with non-positive values; reference
// constants keep all the digits they were computed with.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod error;
pub mod estimation;
pub mod ggn;
pub mod gn;
pub mod gof;
mod optim;
pub mod quadrature;
pub mod sample;
pub mod sampling;
pub mod series;
pub mod specfun;
pub mod study;

pub use error::{Error, Result};
pub use ggn::GgnParams;
pub use gn::GnParams;
pub use sample::Sample;
pub use sampling::StreamSpec;
