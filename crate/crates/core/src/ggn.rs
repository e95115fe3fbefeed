//! The GGN distribution: `F(x) = P(a, -ln(1 - Φ_s(z)))`, `z = (x-μ)/σ`.

use serde::{Deserialize, Serialize};

use crate::error::{domain, invalid, Result};
use crate::gn::{gn_quantile_tails, CdfClamp, GnParams, LnCdf, StdGn};
use crate::specfun::{invert_gamma, ln_gamma_unchecked, ln_pq_with};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GgnParams {
    pub mu: f64,
    pub sigma: f64,
    pub s: f64,
    pub a: f64,
}

impl GgnParams {
    pub fn new(mu: f64, sigma: f64, s: f64, a: f64) -> Result<Self> {
        let p = Self { mu, sigma, s, a };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        self.gn().validate()?;
        if !(self.a > 0.0) || !self.a.is_finite() {
            return Err(invalid(format!("a must be finite and > 0, got {}", self.a)));
        }
        Ok(())
    }

    pub fn gn(&self) -> GnParams {
        GnParams {
            mu: self.mu,
            sigma: self.sigma,
            s: self.s,
        }
    }

    /// As a `[μ, σ, s, a]` array.
    pub fn to_array(&self) -> [f64; 4] {
        [self.mu, self.sigma, self.s, self.a]
    }

    pub fn from_array(v: [f64; 4]) -> Result<Self> {
        Self::new(v[0], v[1], v[2], v[3])
    }
}

/// A GGN law with its shape-dependent constants precomputed.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Ggn {
    pub p: GgnParams,
    pub gn: StdGn,
    pub ln_gamma_a: f64,
    pub ln_sigma: f64,
}

impl Ggn {
    pub fn new(p: GgnParams) -> Self {
        Self {
            p,
            gn: StdGn::new(p.s),
            ln_gamma_a: ln_gamma_unchecked(p.a),
            ln_sigma: p.sigma.ln(),
        }
    }

    /// ln f at standardized `z`, also returning the Φ log view.
    pub fn ln_pdf_std(&self, z: f64) -> (f64, LnCdf) {
        let c = self.gn.ln_cdf(z);
        let lf = self.gn.ln_pdf(z) - self.ln_sigma - self.ln_gamma_a
            + if self.p.a == 1.0 {
                0.0
            } else {
                (self.p.a - 1.0) * c.ln_neg_ln_sf
            };
        (lf, c)
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        self.ln_pdf_std((x - self.p.mu) / self.p.sigma).0
    }

    /// `(F(x), 1 - F(x))`.
    pub fn cdf_pair(&self, x: f64) -> (f64, f64) {
        let c = self.gn.ln_cdf((x - self.p.mu) / self.p.sigma);
        if self.p.a == 1.0 {
            return (c.ln_cdf.exp(), c.ln_sf.exp());
        }
        let t = c.ln_neg_ln_sf.exp();
        let (lp, lq) = ln_pq_with(self.p.a, t, self.ln_gamma_a);
        (lp.exp(), lq.exp())
    }

    pub fn quantile_tails(&self, lower: f64, upper: f64) -> f64 {
        let z = invert_gamma(self.p.a, lower, upper);
        gn_quantile_tails(&self.p.gn(), -(-z).exp_m1(), (-z).exp())
    }
}

pub fn ggn_ln_pdf(p: &GgnParams, x: f64) -> Result<f64> {
    p.validate()?;
    if x.is_nan() {
        return Err(domain("x is NaN"));
    }
    Ok(Ggn::new(*p).ln_pdf(x))
}

/// Density; evaluated in log space so tail values underflow cleanly to 0.
pub fn ggn_pdf(p: &GgnParams, x: f64) -> Result<f64> {
    ggn_ln_pdf(p, x).map(f64::exp)
}

pub fn ggn_cdf(p: &GgnParams, x: f64) -> Result<f64> {
    ggn_cdf_clamped(p, x, CdfClamp::Off)
}

pub fn ggn_cdf_clamped(p: &GgnParams, x: f64, clamp: CdfClamp) -> Result<f64> {
    p.validate()?;
    if x.is_nan() {
        return Err(domain("x is NaN"));
    }
    Ok(clamp.apply(Ggn::new(*p).cdf_pair(x).0))
}

/// Survival function `1 - F(x)`, accurate in the upper tail.
pub fn ggn_sf(p: &GgnParams, x: f64) -> Result<f64> {
    p.validate()?;
    if x.is_nan() {
        return Err(domain("x is NaN"));
    }
    Ok(Ggn::new(*p).cdf_pair(x).1)
}

/// Quantile via the gamma-G transform `X = G⁻¹(1 - e^{-Z})`, `Z = P⁻¹(a, u)`.
pub fn ggn_quantile(p: &GgnParams, u: f64) -> Result<f64> {
    p.validate()?;
    if !(u > 0.0 && u < 1.0) {
        return Err(domain(format!("u must lie in (0, 1), got {u}")));
    }
    Ok(Ggn::new(*p).quantile_tails(u, 1.0 - u))
}

/// Limiting density as s → ∞, supported on `[μ-σ, μ+σ]`.
pub fn ggn_limit_pdf(mu: f64, sigma: f64, a: f64, x: f64) -> Result<f64> {
    GgnParams::new(mu, sigma, 1.0, a)?;
    let w = (x - mu) / sigma;
    if !(-1.0..=1.0).contains(&w) {
        return Ok(0.0);
    }
    // -ln(1 - (1/2 + w/2)) = -ln((1 - w)/2)
    let t = std::f64::consts::LN_2 - (-w).ln_1p();
    let ln_norm = -(2.0 * sigma).ln() - ln_gamma_unchecked(a);
    Ok((ln_norm + (a - 1.0) * t.ln()).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gn::{gn_pdf, gn_quantile};
    use crate::quadrature::{integrate_with_breaks, QuadOptions};

    const INV_SQRT_PI: f64 = 0.564_189_583_547_756_3;
    const LN_2: f64 = std::f64::consts::LN_2;

    fn g(mu: f64, sigma: f64, s: f64, a: f64) -> GgnParams {
        GgnParams::new(mu, sigma, s, a).unwrap()
    }

    #[test]
    fn point_values() {
        assert!((ggn_pdf(&g(0.0, 1.0, 2.0, 1.0), 0.0).unwrap() - INV_SQRT_PI).abs() < 1e-15);
        assert!((ggn_pdf(&g(0.0, 1.0, 1.0, 1.0), 0.0).unwrap() - 0.5).abs() < 1e-15);
        // φ_2(0) (ln 2)^{1} / Γ(2)
        let v = ggn_pdf(&g(0.0, 1.0, 2.0, 2.0), 0.0).unwrap();
        assert!((v - INV_SQRT_PI * LN_2).abs() < 1e-15);
        assert!((v - 0.391_066_419).abs() < 1e-9);
    }

    #[test]
    fn reduces_to_gn_when_a_is_one() {
        let p = g(0.4, 1.7, 0.8, 1.0);
        for i in -30..30 {
            let x = 0.4 + 0.37 * i as f64;
            let a = ggn_pdf(&p, x).unwrap();
            let b = gn_pdf(&p.gn(), x).unwrap();
            assert!((a - b).abs() <= 1e-15 * b.max(1e-300) + 1e-300);
            let u = (i + 30) as f64 / 61.0 + 0.005;
            assert!(
                (ggn_quantile(&p, u).unwrap() - gn_quantile(&p.gn(), u).unwrap()).abs() < 1e-12
            );
        }
    }

    #[test]
    fn cdf_values() {
        assert_eq!(ggn_cdf(&g(0.0, 1.0, 1.3, 1.0), 0.0).unwrap(), 0.5);
        let v = ggn_cdf(&g(0.0, 1.0, 1.3, 2.0), 0.0).unwrap();
        assert!((v - (1.0 - (1.0 + LN_2) / 2.0)).abs() < 1e-15);
        let p = g(0.0, 1.0, 2.0, 3.0);
        assert!(ggn_cdf(&p, -1e6).unwrap() < 1e-300);
        assert_eq!(ggn_cdf(&p, 1e6).unwrap(), 1.0);
    }

    #[test]
    fn quantile_inverse_example() {
        let x = ggn_quantile(&g(0.0, 1.0, 2.0, 1.0), 0.921_350_396_474_857_4).unwrap();
        assert!((x - 1.0).abs() < 1e-12);
        assert!(ggn_quantile(&g(0.0, 1.0, 2.0, 1.0), 1.0).is_err());
    }

    #[test]
    fn normalization() {
        for s in [0.5, 1.0, 2.0, 3.0] {
            for a in [0.5, 1.0, 2.0, 5.0] {
                let d = Ggn::new(g(0.0, 1.0, s, a));
                let r = integrate_with_breaks(
                    |x| d.ln_pdf(x).exp(),
                    &[f64::NEG_INFINITY, -1.0, 0.0, 1.0, f64::INFINITY],
                    &QuadOptions::default(),
                );
                assert!((r.value - 1.0).abs() < 1e-7, "s={s} a={a}: {}", r.value);
            }
        }
    }

    #[test]
    fn cdf_derivative_is_pdf() {
        let p = g(0.3, 0.8, 1.6, 2.4);
        for i in 1..=50 {
            let u = (i as f64 - 0.5) / 50.0;
            let x = ggn_quantile(&p, u).unwrap();
            let h = 1e-5 * p.sigma;
            let fd = (ggn_cdf(&p, x + h).unwrap() - ggn_cdf(&p, x - h).unwrap()) / (2.0 * h);
            let f = ggn_pdf(&p, x).unwrap();
            assert!((fd - f).abs() <= 1e-6 * f, "u={u}: {fd} vs {f}");
        }
    }

    #[test]
    fn location_scale_closure() {
        let base = g(0.0, 1.0, 0.7, 3.1);
        let moved = g(-2.0, 4.5, 0.7, 3.1);
        for i in -20..20 {
            let x = 0.9 * i as f64;
            let a = ggn_pdf(&moved, x).unwrap();
            let b = ggn_pdf(&base, (x + 2.0) / 4.5).unwrap() / 4.5;
            assert!((a - b).abs() <= 1e-12 * b.max(1e-300));
        }
    }

    #[test]
    fn limit_pdf_values() {
        for x in [-0.9, 0.0, 0.5] {
            assert!((ggn_limit_pdf(0.0, 1.0, 1.0, x).unwrap() - 0.5).abs() < 1e-15);
        }
        assert!((ggn_limit_pdf(0.0, 1.0, 2.0, 0.0).unwrap() - LN_2 / 2.0).abs() < 1e-15);
        assert_eq!(ggn_limit_pdf(0.0, 1.0, 2.0, 1.5).unwrap(), 0.0);
        assert_eq!(ggn_limit_pdf(0.0, 1.0, 2.0, -1.01).unwrap(), 0.0);
    }

    #[test]
    fn large_s_approaches_limit() {
        // The sup error over [μ-σ+0.05, μ+σ-0.05] decays like 1/s
        // (0.056, 0.033, 0.017 at s = 100, 200, 400).
        let sup = |s: f64| {
            let p = g(0.0, 1.0, s, 2.0);
            (0..=180)
                .map(|i| -0.95 + 1.9 * i as f64 / 180.0)
                .map(|x| (ggn_pdf(&p, x).unwrap() - ggn_limit_pdf(0.0, 1.0, 2.0, x).unwrap()).abs())
                .fold(0.0, f64::max)
        };
        let (e100, e200, e400) = (sup(100.0), sup(200.0), sup(400.0));
        assert!(e100 > e200 && e200 > e400, "{e100} {e200} {e400}");
        assert!(e200 < 0.04, "{e200}");
        assert!(e400 < 0.6 * e200);
    }

    #[test]
    fn tails_stay_finite_in_log_space() {
        let p = g(0.0, 1.0, 2.0, 0.6);
        for x in [-40.0, -20.0, 20.0, 40.0] {
            let l = ggn_ln_pdf(&p, x).unwrap();
            assert!(l.is_finite() && l < -100.0, "x={x}: {l}");
        }
        assert!(ggn_sf(&p, 8.0).unwrap() > 0.0);
    }
}
