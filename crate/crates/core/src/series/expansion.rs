use super::{ExpansionCoefficients, SeriesConfig, SeriesValue, Stopper};
use crate::error::{invalid, Result};
use crate::ggn::GgnParams;
use crate::gn::{GnParams, StdGn};

fn check_c(c: f64) -> Result<()> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(invalid(format!(
            "power parameter must be finite and > 0, got {c}"
        )));
    }
    Ok(())
}

/// ln h_c(x) for the exponentiated GN law with cdf `Φ_s(z)^c`.
pub fn egn_ln_pdf(c: f64, p: &GnParams, x: f64) -> Result<f64> {
    check_c(c)?;
    p.validate()?;
    let g = StdGn::new(p.s);
    let z = p.standardize(x);
    Ok(c.ln() + g.ln_pdf(z) - p.sigma.ln() + (c - 1.0) * g.ln_cdf(z).ln_cdf)
}

/// h_c(x) = c g(x) Φ_s(z)^{c-1}.
pub fn egn_pdf(c: f64, p: &GnParams, x: f64) -> Result<f64> {
    egn_ln_pdf(c, p, x).map(f64::exp)
}

/// H_c(x) = Φ_s(z)^c.
pub fn egn_cdf(c: f64, p: &GnParams, x: f64) -> Result<f64> {
    check_c(c)?;
    p.validate()?;
    let g = StdGn::new(p.s);
    Ok((c * g.ln_cdf(p.standardize(x)).ln_cdf).exp())
}

fn check_inputs(coefs: &ExpansionCoefficients, p: &GgnParams, cfg: &SeriesConfig) -> Result<()> {
    cfg.validate()?;
    p.validate()?;
    if coefs.a_param != p.a {
        return Err(invalid(format!(
            "coefficients were built for a = {}, parameters have a = {}",
            coefs.a_param, p.a
        )));
    }
    Ok(())
}

fn sum_terms(
    coefs: &mut ExpansionCoefficients,
    cfg: &SeriesConfig,
    term: impl Fn(usize, f64) -> f64,
) -> SeriesValue {
    let mut sum = 0.0;
    let mut stop = Stopper::new(cfg.tolerance);
    let mut t = 0.0;
    for k in 0..cfg.max_terms {
        if k >= coefs.len() {
            coefs.extend_to((2 * k).min(cfg.max_terms - 1));
        }
        t = term(k, coefs.b(k));
        sum += t;
        if stop.done(t, sum) {
            return SeriesValue {
                value: sum,
                terms: k + 1,
                converged: true,
                last_term: t,
            };
        }
    }
    SeriesValue {
        value: sum,
        terms: cfg.max_terms,
        converged: false,
        last_term: t,
    }
}

/// Truncated `f(x) = Σ_k b_k h_{a+k}(x)`. `coefs` is extended on demand.
pub fn expansion_pdf(
    coefs: &mut ExpansionCoefficients,
    p: &GgnParams,
    x: f64,
    cfg: &SeriesConfig,
) -> Result<SeriesValue> {
    check_inputs(coefs, p, cfg)?;
    let g = StdGn::new(p.s);
    let z = p.gn().standardize(x);
    let ln_g = g.ln_pdf(z) - p.sigma.ln();
    let ln_phi = g.ln_cdf(z).ln_cdf;
    let a = p.a;
    Ok(sum_terms(coefs, cfg, |k, b| {
        let c = a + k as f64;
        b * c * (ln_g + (c - 1.0) * ln_phi).exp()
    }))
}

/// Truncated `F(x) = Σ_k b_k H_{a+k}(x)`.
pub fn expansion_cdf(
    coefs: &mut ExpansionCoefficients,
    p: &GgnParams,
    x: f64,
    cfg: &SeriesConfig,
) -> Result<SeriesValue> {
    check_inputs(coefs, p, cfg)?;
    let g = StdGn::new(p.s);
    let ln_phi = g.ln_cdf(p.gn().standardize(x)).ln_cdf;
    let a = p.a;
    Ok(sum_terms(coefs, cfg, |k, b| {
        b * ((a + k as f64) * ln_phi).exp()
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ggn::{ggn_cdf, ggn_pdf};
    use crate::gn::{gn_cdf, gn_pdf};
    use crate::quadrature::{integrate_with_breaks, QuadOptions};

    #[test]
    fn egn_with_unit_power_is_gn() {
        let p = GnParams::new(0.3, 1.2, 1.7).unwrap();
        for x in [-2.0, 0.0, 0.3, 1.9] {
            assert!((egn_pdf(1.0, &p, x).unwrap() - gn_pdf(&p, x).unwrap()).abs() < 1e-15);
            assert!((egn_cdf(1.0, &p, x).unwrap() - gn_cdf(&p, x).unwrap()).abs() < 1e-15);
        }
    }

    #[test]
    fn egn_cdf_at_location() {
        let p = GnParams::new(-1.0, 2.0, 0.9).unwrap();
        for c in [0.5, 2.0, 3.7] {
            assert!((egn_cdf(c, &p, -1.0).unwrap() - 0.5_f64.powf(c)).abs() < 1e-15);
        }
    }

    #[test]
    fn egn_integrates_to_one() {
        for s in [1.0, 2.0] {
            let p = GnParams::new(0.0, 1.0, s).unwrap();
            for c in [0.5, 2.0, 3.7] {
                let r = integrate_with_breaks(
                    |x| egn_pdf(c, &p, x).unwrap(),
                    &[f64::NEG_INFINITY, 0.0, f64::INFINITY],
                    &QuadOptions::default(),
                );
                assert!((r.value - 1.0).abs() < 1e-7, "s={s} c={c}: {}", r.value);
            }
        }
    }

    #[test]
    fn expansion_reconstructs_density_at_central_points() {
        let cfg = SeriesConfig {
            tolerance: 1e-12,
            max_terms: 5000,
        };
        for (a, s) in [(2.5, 2.0), (0.7, 1.0)] {
            let p = GgnParams::new(0.0, 1.0, s, a).unwrap();
            let mut coefs = ExpansionCoefficients::new(a, 64).unwrap();
            for x in [-1.0, 0.0, 1.0] {
                let e = expansion_pdf(&mut coefs, &p, x, &cfg).unwrap();
                let f = ggn_pdf(&p, x).unwrap();
                assert!(e.converged);
                assert!(
                    (e.value - f).abs() < 1e-5,
                    "a={a} s={s} x={x}: {} vs {f}",
                    e.value
                );
                let c = expansion_cdf(&mut coefs, &p, x, &cfg).unwrap();
                assert!((c.value - ggn_cdf(&p, x).unwrap()).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn expansion_checks_coefficient_shape() {
        let p = GgnParams::new(0.0, 1.0, 2.0, 2.5).unwrap();
        let mut coefs = ExpansionCoefficients::new(0.7, 10).unwrap();
        assert!(expansion_pdf(&mut coefs, &p, 0.0, &SeriesConfig::default()).is_err());
    }

    #[test]
    fn default_cap_is_reported_when_too_small() {
        // Far in the upper tail Φ ≈ 1 and the series needs thousands of
        // terms; with the default cap the sum must say so.
        let p = GgnParams::new(0.0, 1.0, 2.0, 2.5).unwrap();
        let mut coefs = ExpansionCoefficients::new(2.5, 10).unwrap();
        let v = expansion_pdf(&mut coefs, &p, 2.5, &SeriesConfig::default()).unwrap();
        assert!(!v.converged);
    }
}
