//! Generalized normal distribution with density
//! `s / (2σΓ(1/s)) · exp(-|(x-μ)/σ|^s)`.

use serde::{Deserialize, Serialize};
use std::f64::consts::LN_2;

use crate::error::{domain, invalid, Result};
use crate::specfun::{invert_gamma, ln_gamma_unchecked, ln_pq_from_ln_x};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GnParams {
    pub mu: f64,
    pub sigma: f64,
    pub s: f64,
}

impl GnParams {
    pub fn new(mu: f64, sigma: f64, s: f64) -> Result<Self> {
        let p = Self { mu, sigma, s };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mu.is_finite() {
            return Err(invalid(format!("mu must be finite, got {}", self.mu)));
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(invalid(format!(
                "sigma must be finite and > 0, got {}",
                self.sigma
            )));
        }
        check_shape(self.s)
    }

    pub fn standardize(&self, x: f64) -> f64 {
        (x - self.mu) / self.sigma
    }
}

pub(crate) fn check_shape(s: f64) -> Result<()> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(invalid(format!("s must be finite and > 0, got {s}")));
    }
    Ok(())
}

/// Whether a distribution function value may be pushed off exactly 0 or 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum CdfClamp {
    #[default]
    Off,
    /// Clamp into `[5e-324, 1 - 2^-53]`.
    OpenUnit,
}

impl CdfClamp {
    pub fn apply(self, v: f64) -> f64 {
        match self {
            CdfClamp::Off => v,
            CdfClamp::OpenUnit => v.clamp(f64::from_bits(1), 1.0 - f64::EPSILON / 2.0),
        }
    }
}

/// `|z|^s`, with the zero branch handled explicitly.
pub(crate) fn abs_pow(z: f64, s: f64) -> f64 {
    if z == 0.0 {
        0.0
    } else {
        (s * z.abs().ln()).exp()
    }
}

/// Standardized GN of a fixed shape with its normalizing constants cached.
#[derive(Debug, Clone, Copy)]
pub(crate) struct StdGn {
    pub s: f64,
    pub inv_s: f64,
    pub ln_gamma_inv_s: f64,
    ln_norm: f64,
}

/// Log-space view of Φ_s at one point.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LnCdf {
    /// ln Φ_s(z)
    pub ln_cdf: f64,
    /// ln(1 - Φ_s(z))
    pub ln_sf: f64,
    /// ln(-ln(1 - Φ_s(z)))
    pub ln_neg_ln_sf: f64,
}

impl StdGn {
    pub fn new(s: f64) -> Self {
        let inv_s = 1.0 / s;
        let lg = ln_gamma_unchecked(inv_s);
        Self {
            s,
            inv_s,
            ln_gamma_inv_s: lg,
            ln_norm: s.ln() - LN_2 - lg,
        }
    }

    pub fn ln_pdf(&self, z: f64) -> f64 {
        self.ln_norm - abs_pow(z, self.s)
    }

    pub fn ln_cdf(&self, z: f64) -> LnCdf {
        // y = |z|^s may underflow while ln y and P(1/s, y) ~ |z| do not.
        let ln_y = if z == 0.0 {
            f64::NEG_INFINITY
        } else {
            self.s * z.abs().ln()
        };
        let (ln_p, ln_q) = ln_pq_from_ln_x(self.inv_s, ln_y.exp(), ln_y, self.ln_gamma_inv_s);
        // Φ = Q/2 on the left, (1+P)/2 on the right; 1-Φ mirrors it.
        let ln_half_1p_p = ln_p.exp().ln_1p() - LN_2;
        let ln_half_q = ln_q - LN_2;
        if z <= 0.0 {
            let phi = ln_half_q.exp();
            let ln_neg_ln_sf = if phi < 0.25 {
                ln_half_q + (-(-phi).ln_1p() / phi).ln()
            } else {
                (-ln_half_1p_p).ln()
            };
            LnCdf {
                ln_cdf: ln_half_q,
                ln_sf: ln_half_1p_p,
                ln_neg_ln_sf: if phi == 0.0 { ln_half_q } else { ln_neg_ln_sf },
            }
        } else {
            LnCdf {
                ln_cdf: ln_half_1p_p,
                ln_sf: ln_half_q,
                ln_neg_ln_sf: (LN_2 - ln_q).ln(),
            }
        }
    }

    pub fn cdf(&self, z: f64) -> f64 {
        self.ln_cdf(z).ln_cdf.exp()
    }
}

/// Standardized density φ_s(z).
pub fn std_gn_pdf(s: f64, z: f64) -> Result<f64> {
    check_shape(s)?;
    Ok(StdGn::new(s).ln_pdf(z).exp())
}

/// Standardized distribution function Φ_s(z).
pub fn std_gn_cdf(s: f64, z: f64) -> Result<f64> {
    check_shape(s)?;
    if z.is_nan() {
        return Err(domain("z is NaN"));
    }
    Ok(StdGn::new(s).cdf(z))
}

pub fn gn_pdf(p: &GnParams, x: f64) -> Result<f64> {
    p.validate()?;
    Ok((StdGn::new(p.s).ln_pdf(p.standardize(x)) - p.sigma.ln()).exp())
}

pub fn gn_ln_pdf(p: &GnParams, x: f64) -> Result<f64> {
    p.validate()?;
    Ok(StdGn::new(p.s).ln_pdf(p.standardize(x)) - p.sigma.ln())
}

pub fn gn_cdf(p: &GnParams, x: f64) -> Result<f64> {
    gn_cdf_clamped(p, x, CdfClamp::Off)
}

pub fn gn_cdf_clamped(p: &GnParams, x: f64, clamp: CdfClamp) -> Result<f64> {
    p.validate()?;
    if x.is_nan() {
        return Err(domain("x is NaN"));
    }
    Ok(clamp.apply(StdGn::new(p.s).cdf(p.standardize(x))))
}

/// GN quantile given both `u` and `1 - u`, so either tail keeps precision.
pub(crate) fn gn_quantile_tails(p: &GnParams, lower: f64, upper: f64) -> f64 {
    let inv_s = 1.0 / p.s;
    let (sign, pp, qq) = if lower <= upper {
        (-1.0, upper - lower, 2.0 * lower)
    } else {
        (1.0, lower - upper, 2.0 * upper)
    };
    let g = invert_gamma(inv_s, pp, qq);
    let r = if g == 0.0 {
        0.0
    } else {
        (g.ln() * inv_s).exp()
    };
    p.mu + sign * p.sigma * r
}

/// Inverse of [`gn_cdf`] for `u ∈ (0,1)`.
pub fn gn_quantile(p: &GnParams, u: f64) -> Result<f64> {
    p.validate()?;
    if !(u > 0.0 && u < 1.0) {
        return Err(domain(format!("u must lie in (0, 1), got {u}")));
    }
    Ok(gn_quantile_tails(p, u, 1.0 - u))
}
