//! Series machinery: expansion coefficients, the exponentiated-GN (EGN)
//! building blocks, the linear-combination density expansion and the
//! moment series, plus a quadrature moment oracle.
//!
//! Every infinite sum is truncated by the same rule: stop once
//! `|term| <= tolerance * |partial sum|` holds for three consecutive terms,
//! or when `max_terms` terms have been used. A sum that hits the cap is
//! returned with `converged = false` rather than as an error, so callers
//! can inspect the achieved residual.

mod coeffs;
mod expansion;
mod moments;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub use coeffs::{
    b_coeff, c_mr_coeff, c_mr_coeff_uncached, p_coeff, p_coeff_uncached, v_coeff,
    ExpansionCoefficients,
};
pub use expansion::{egn_cdf, egn_ln_pdf, egn_pdf, expansion_cdf, expansion_pdf};
pub use moments::{
    ggn_moment, ggn_moment_quadrature, pwm_j, pwm_j_quadrature, pwm_t_power_series, pwm_tau,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesConfig {
    pub tolerance: f64,
    pub max_terms: usize,
}

impl Default for SeriesConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_terms: 200,
        }
    }
}

impl SeriesConfig {
    pub fn new(tolerance: f64, max_terms: usize) -> Result<Self> {
        let c = Self {
            tolerance,
            max_terms,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0 && self.tolerance <= 1e-3) {
            return Err(invalid(format!(
                "series tolerance must lie in (0, 1e-3], got {}",
                self.tolerance
            )));
        }
        if self.max_terms < 10 {
            return Err(invalid(format!(
                "max_terms must be at least 10, got {}",
                self.max_terms
            )));
        }
        Ok(())
    }
}

/// A truncated series sum with its diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesValue {
    pub value: f64,
    pub terms: usize,
    pub converged: bool,
    pub last_term: f64,
}

impl SeriesValue {
    /// Turns a capped sum into [`Error::NonConvergence`].
    pub fn into_result(self) -> Result<f64> {
        if self.converged {
            Ok(self.value)
        } else {
            Err(Error::NonConvergence {
                terms: self.terms,
                last_term: self.last_term,
            })
        }
    }
}

/// The three-consecutive-small-terms stopping rule.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Stopper {
    tol: f64,
    run: usize,
}

impl Stopper {
    pub fn new(tol: f64) -> Self {
        Self { tol, run: 0 }
    }

    /// Records a term after it was added to `sum`; true once the sum may stop.
    pub fn done(&mut self, term: f64, sum: f64) -> bool {
        if term.abs() <= self.tol * sum.abs() {
            self.run += 1;
        } else {
            self.run = 0;
        }
        self.run >= 3
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(SeriesConfig::new(1e-8, 50).is_ok());
        assert!(SeriesConfig::new(0.0, 50).is_err());
        assert!(SeriesConfig::new(1e-2, 50).is_err());
        assert!(SeriesConfig::new(1e-8, 9).is_err());
        assert!(SeriesConfig::default().validate().is_ok());
    }

    #[test]
    fn stopper_needs_three_in_a_row() {
        let mut s = Stopper::new(1e-3);
        assert!(!s.done(1e-4, 1.0));
        assert!(!s.done(1e-4, 1.0));
        assert!(!s.done(1.0, 1.0));
        assert!(!s.done(1e-4, 1.0));
        assert!(!s.done(1e-4, 1.0));
        assert!(s.done(1e-4, 1.0));
    }

    #[test]
    fn capped_sum_reports_non_convergence() {
        let v = SeriesValue {
            value: 1.0,
            terms: 200,
            converged: false,
            last_term: 0.1,
        };
        assert!(matches!(
            v.into_result(),
            Err(Error::NonConvergence { terms: 200, .. })
        ));
    }
}
