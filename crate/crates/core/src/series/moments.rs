//! Probability weighted moments of the standard GN law and the GGN moment
//! series built on them.
//!
//! Both reduce to the integrals
//! `τ_{i,r} = ∫_0^∞ t^{b-1} e^{-t} P(1/s, t)^r dt`, `b = (i+1)/s`,
//! which are summed from the positive Kummer form
//! `P(a, t) = t^a e^{-t} Σ_n t^n/(a+1)_n / Γ(a+1)`, `a = 1/s`:
//! `τ_{i,r} = Γ(a+1)^{-r} Σ_m e^{(r)}_m Γ(β+m)/(r+1)^{β+m}`, `β = b + r a`.
//! The terms are positive and eventually shrink like `(r/(r+1))^m`.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use super::{ExpansionCoefficients, SeriesConfig, SeriesValue, Stopper};
use crate::error::{domain, Error, Result};
use crate::ggn::{ggn_pdf, ggn_quantile, GgnParams};
use crate::gn::{check_shape, std_gn_cdf, std_gn_pdf};
use crate::quadrature::{integrate_with_breaks, QuadOptions};
use crate::specfun::{binomial, ln_gamma_unchecked};

/// Cap on the inner index for a given r. The inner terms contract by
/// `r/(r+1)`, so the number needed grows linearly in r.
fn inner_cap(r: usize, cfg: &SeriesConfig) -> usize {
    cfg.max_terms * (r + 1)
}

/// ln of the scaled coefficients `ê^{(r)}_m = e^{(r)}_m m!/r^m`, where
/// `e^{(r)}_m` is the coefficient of t^m in `(Σ_n t^n/(a+1)_n)^r`.
///
/// Since `e^{(r)} = e^{(r-1)} * e^{(1)}`, the scaled rows obey
/// `ê^{(r)}_m = Σ_l Bin(l; m, 1/r) κ_l ê^{(r-1)}_{m-l}` with
/// `κ_l = l!/(a+1)_l`. Every factor lies in (0, 1], so the recursion is
/// free of cancellation; it is evaluated in log space over the window of
/// l where the summand is within e^{-46} of its peak.
struct KummerRows {
    a: f64,
    ln_kappa: Vec<f64>,
    ln_fact: Vec<f64>,
    rows: Vec<Vec<f64>>,
}

const WINDOW: f64 = 46.0;

impl KummerRows {
    fn new(a: f64) -> Self {
        Self {
            a,
            ln_kappa: Vec::new(),
            ln_fact: vec![0.0],
            rows: vec![vec![0.0]],
        }
    }

    fn grow_tables(&mut self, m: usize) {
        while self.ln_fact.len() <= m {
            let k = self.ln_fact.len();
            self.ln_fact.push(ln_gamma_unchecked(k as f64 + 1.0));
        }
        let lga1 = ln_gamma_unchecked(self.a + 1.0);
        while self.ln_kappa.len() <= m {
            let l = self.ln_kappa.len() as f64;
            self.ln_kappa
                .push(ln_gamma_unchecked(l + 1.0) + lga1 - ln_gamma_unchecked(self.a + 1.0 + l));
        }
    }

    /// Makes row `r` cover indices `0..=m`.
    fn ensure(&mut self, r: usize, m: usize) {
        if r == 0 {
            while self.rows[0].len() <= m {
                self.rows[0].push(f64::NEG_INFINITY);
            }
            return;
        }
        if self.rows.len() > r && self.rows[r].len() > m {
            return;
        }
        self.grow_tables(m);
        if r == 1 {
            if self.rows.len() < 2 {
                self.rows.push(Vec::new());
            }
            let row = &mut self.rows[1];
            for k in row.len()..=m {
                row.push(self.ln_kappa[k]);
            }
            return;
        }
        self.ensure(r - 1, m);
        if self.rows.len() <= r {
            self.rows.push(Vec::new());
        }
        let rf = r as f64;
        let ln_p = -rf.ln();
        let ln_q = ((rf - 1.0) / rf).ln();
        let start = self.rows[r].len();
        let mut new = Vec::with_capacity(m + 1 - start);
        let prev = &self.rows[r - 1];
        let lf = &self.ln_fact;
        let lk = &self.ln_kappa;
        let mut guess = 0usize;
        for mm in start..=m {
            let f = |l: usize| {
                lf[mm] - lf[l] - lf[mm - l]
                    + l as f64 * ln_p
                    + (mm - l) as f64 * ln_q
                    + lk[l]
                    + prev[mm - l]
            };
            let mut l = guess.min(mm);
            let mut best = f(l);
            while l < mm && f(l + 1) > best {
                l += 1;
                best = f(l);
            }
            while l > 0 && f(l - 1) > best {
                l -= 1;
                best = f(l);
            }
            guess = l;
            let mut sum = 1.0;
            let mut lo = l;
            while lo > 0 {
                let v = f(lo - 1) - best;
                if v < -WINDOW {
                    break;
                }
                sum += v.exp();
                lo -= 1;
            }
            let mut hi = l;
            while hi < mm {
                let v = f(hi + 1) - best;
                if v < -WINDOW {
                    break;
                }
                sum += v.exp();
                hi += 1;
            }
            new.push(best + sum.ln());
        }
        self.rows[r].extend(new);
    }
}

fn kummer_cache() -> &'static Mutex<HashMap<u64, KummerRows>> {
    static CACHE: OnceLock<Mutex<HashMap<u64, KummerRows>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

fn tau_uncached(i: usize, r: usize, s: f64, cfg: &SeriesConfig) -> SeriesValue {
    let a = 1.0 / s;
    let b = (i + 1) as f64 / s;
    if r == 0 {
        return SeriesValue {
            value: ln_gamma_unchecked(b).exp(),
            terms: 1,
            converged: true,
            last_term: 0.0,
        };
    }
    let rf = r as f64;
    let beta = b + rf * a;
    let rp1 = rf + 1.0;
    let ln_ratio = (rf / rp1).ln();
    let ln_pre = -rf * ln_gamma_unchecked(a + 1.0) - beta * rp1.ln();
    let cap = inner_cap(r, cfg);
    let mut cache = kummer_cache().lock().expect("kummer cache poisoned");
    let rows = cache
        .entry(s.to_bits())
        .or_insert_with(|| KummerRows::new(a));
    let mut chunk = 64 * (r + 1);
    // The sum is kept relative to exp(shift) since the leading terms can
    // underflow while the peak near m ≈ (b-1)(r+1) is O(1). The stopping
    // test uses the geometric tail bound `(r+1) |term|`.
    let mut shift = f64::NAN;
    let mut sum = 0.0;
    let mut stop = Stopper::new(cfg.tolerance);
    let mut last = 0.0;
    let mut m = 0;
    let mut ln_g = ln_gamma_unchecked(beta);
    let mut ln_mf = 0.0;
    let finish = |sum: f64, shift: f64, last: f64, terms: usize, converged: bool| SeriesValue {
        value: sum * shift.exp(),
        terms,
        converged,
        last_term: last * shift.exp(),
    };
    while m < cap {
        let upto = (m + chunk).min(cap) - 1;
        rows.ensure(r, upto);
        let row = &rows.rows[r];
        while m <= upto {
            if m > 0 {
                ln_g += (beta + m as f64 - 1.0).ln();
                ln_mf += (m as f64).ln();
            }
            let ln_t = ln_pre + ln_g - ln_mf + m as f64 * ln_ratio + row[m];
            if shift.is_nan() || ln_t > shift + 600.0 {
                if !shift.is_nan() {
                    sum *= (shift - ln_t).exp();
                }
                shift = ln_t;
            }
            last = (ln_t - shift).exp();
            sum += last;
            m += 1;
            if stop.done(rp1 * last, sum) {
                return finish(sum, shift, last, m, true);
            }
        }
        chunk *= 2;
    }
    finish(sum, shift, last, cap, false)
}

type TauKey = (usize, u64, u64, usize);

fn tau_cache() -> &'static Mutex<HashMap<TauKey, Vec<SeriesValue>>> {
    static CACHE: OnceLock<Mutex<HashMap<TauKey, Vec<SeriesValue>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// τ_{i,0..=r_max} for one (i, s, cfg), memoized.
fn tau_row(i: usize, r_max: usize, s: f64, cfg: &SeriesConfig) -> Vec<SeriesValue> {
    let key = (i, s.to_bits(), cfg.tolerance.to_bits(), cfg.max_terms);
    let mut known = tau_cache()
        .lock()
        .expect("tau cache poisoned")
        .get(&key)
        .cloned()
        .unwrap_or_default();
    if known.len() > r_max {
        known.truncate(r_max + 1);
        return known;
    }
    for r in known.len()..=r_max {
        known.push(tau_uncached(i, r, s, cfg));
    }
    let mut guard = tau_cache().lock().expect("tau cache poisoned");
    let slot = guard.entry(key).or_default();
    if slot.len() < known.len() {
        *slot = known.clone();
    }
    known
}

fn check_cfg_s(s: f64, cfg: &SeriesConfig) -> Result<()> {
    cfg.validate()?;
    check_shape(s)
}

/// `τ_{i,r} = ∫_0^∞ t^{(i+1)/s-1} e^{-t} P(1/s, t)^r dt`.
pub fn pwm_tau(i: usize, r: usize, s: f64, cfg: &SeriesConfig) -> Result<SeriesValue> {
    check_cfg_s(s, cfg)?;
    Ok(tau_row(i, r, s, cfg)[r])
}

/// `J_{i,j} = ∫_0^∞ z^i φ_s(z) Φ_s(z)^j dz`, summed as
/// `(2Γ(1/s))⁻¹ 2^{-j} Σ_{r=0}^j C(j,r) τ_{i,r}`.
///
/// The reported `terms` is the largest inner length used; the value is
/// flagged unconverged if any τ_{i,r} was.
pub fn pwm_j(i: usize, j: usize, s: f64, cfg: &SeriesConfig) -> Result<SeriesValue> {
    check_cfg_s(s, cfg)?;
    let row = tau_row(i, j, s, cfg);
    let mut sum = 0.0;
    let mut terms = 0;
    let mut converged = true;
    let mut last_term = 0.0;
    for (r, t) in row.iter().enumerate() {
        let w = binomial(j as f64, r);
        sum += w * t.value;
        terms = terms.max(t.terms);
        if !t.converged {
            converged = false;
            last_term = w * t.last_term;
        }
    }
    let scale = (-(ln_gamma_unchecked(1.0 / s) + std::f64::consts::LN_2 * (j as f64 + 1.0))).exp();
    Ok(SeriesValue {
        value: scale * sum,
        terms,
        converged,
        last_term: scale * last_term,
    })
}

/// Direct adaptive quadrature of the defining integral of `J_{i,j}`.
pub fn pwm_j_quadrature(i: usize, j: usize, s: f64) -> Result<f64> {
    check_shape(s)?;
    let f = |z: f64| {
        let phi = std_gn_pdf(s, z).unwrap_or(0.0);
        let cdf = std_gn_cdf(s, z).unwrap_or(1.0);
        z.powi(i as i32) * phi * cdf.powi(j as i32)
    };
    let opts = QuadOptions {
        abs_tol: 1e-13,
        rel_tol: 1e-11,
        max_intervals: 4000,
    };
    integrate_with_breaks(f, &[0.0, 1.0, 4.0, f64::INFINITY], &opts).into_result()
}

/// `T_{i,r} = ∫_0^∞ t^{(i+1)/s-1} e^{-t} γ(1/s, t)^r dt` from the
/// alternating power-series coefficients:
/// `T_{i,r} = Σ_m c_{m,r} Γ((i+1)/s + r/s + m)`.
///
/// Even where this form converges the terms only shrink algebraically,
/// the coefficient recursion loses accuracy after a few dozen terms, and
/// for r >= 2 the terms grow. It is kept as a cross-check of [`pwm_tau`],
/// which equals `T_{i,r} / Γ(1/s)^r`.
pub fn pwm_t_power_series(i: usize, r: usize, s: f64, cfg: &SeriesConfig) -> Result<SeriesValue> {
    check_cfg_s(s, cfg)?;
    let beta = (i + 1 + r) as f64 / s;
    let mut sum = 0.0;
    let mut stop = Stopper::new(cfg.tolerance);
    let mut term = 0.0;
    for m in 0..cfg.max_terms {
        let c = super::c_mr_coeff(m, r, s)?;
        term = if c == 0.0 {
            0.0
        } else {
            c.signum() * (c.abs().ln() + ln_gamma_unchecked(beta + m as f64)).exp()
        };
        sum += term;
        if !sum.is_finite() {
            break;
        }
        if stop.done(term, sum) {
            return Ok(SeriesValue {
                value: sum,
                terms: m + 1,
                converged: true,
                last_term: term,
            });
        }
    }
    Ok(SeriesValue {
        value: sum,
        terms: cfg.max_terms,
        converged: false,
        last_term: term,
    })
}

/// `W_r = Σ_k (a+k) b_k 2^{-(a+k-1)} C(a+k-1, r)` for r = 0..=r_max.
///
/// These are the weights of `P(1/s,|z|^s)^r` after expanding every
/// `Φ^{a+k-1} = 2^{-(a+k-1)} (1 ± P)^{a+k-1}` binomially.
fn moment_weights(a: f64, r_max: usize, cfg: &SeriesConfig) -> Result<(Vec<f64>, bool)> {
    let k_cap = 20 * cfg.max_terms.max(r_max);
    let mut coefs = ExpansionCoefficients::new(a, 64)?;
    let mut w = vec![0.0; r_max + 1];
    let mut stops = vec![Stopper::new(cfg.tolerance); r_max + 1];
    let mut done = vec![false; r_max + 1];
    let ln2 = std::f64::consts::LN_2;
    for k in 0..k_cap {
        if k >= coefs.len() {
            coefs.extend_to((2 * k).min(k_cap));
        }
        let alpha = a + k as f64 - 1.0;
        let lead = (a + k as f64) * coefs.b(k);
        if lead == 0.0 {
            continue;
        }
        // ln|C(α,r) 2^{-α}| carried along r.
        let mut ln_c = -alpha * ln2;
        let mut sign = lead.signum();
        let ln_lead = lead.abs().ln();
        for r in 0..=r_max {
            if r > 0 {
                let f = alpha - r as f64 + 1.0;
                if f == 0.0 {
                    break;
                }
                if f < 0.0 {
                    sign = -sign;
                }
                ln_c += f.abs().ln() - (r as f64).ln();
            }
            if done[r] {
                continue;
            }
            let term = sign * (ln_lead + ln_c).exp();
            w[r] += term;
            // Terms for a given r peak near α ≈ 2r; do not stop before.
            if stops[r].done(term, w[r]) && alpha > 2.0 * r as f64 + 2.0 {
                done[r] = true;
            }
        }
        if done.iter().all(|&d| d) {
            return Ok((w, true));
        }
    }
    Ok((w, false))
}

/// `E[Z^i]` for the standardized GGN, `i = 0..=n`.
fn std_moments(n: usize, s: f64, a: f64, cfg: &SeriesConfig) -> Result<Vec<SeriesValue>> {
    let r_max = cfg.max_terms - 1;
    let (w, w_ok) = moment_weights(a, r_max, cfg)?;
    let norm = 0.5 * (-ln_gamma_unchecked(1.0 / s)).exp();
    let mut out = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let row = tau_row(i, r_max, s, cfg);
        let mut sum = 0.0;
        let mut stop = Stopper::new(cfg.tolerance);
        let mut inner_ok = true;
        let mut result = None;
        let mut term = 0.0;
        for r in 0..=r_max {
            term = if (i + r) % 2 == 0 {
                2.0 * norm * w[r] * row[r].value
            } else {
                0.0
            };
            inner_ok &= row[r].converged;
            sum += term;
            if stop.done(term, sum) {
                result = Some(SeriesValue {
                    value: sum,
                    terms: r + 1,
                    converged: inner_ok && w_ok,
                    last_term: term,
                });
                break;
            }
        }
        out.push(result.unwrap_or(SeriesValue {
            value: sum,
            terms: r_max + 1,
            converged: false,
            last_term: term,
        }));
    }
    Ok(out)
}

/// E(X^n) from the expansion moment series.
///
/// The standardized moments are combined by
/// `E(X^n) = Σ_i C(n,i) σ^i μ^{n-i} E(Z^i)`, so μ = 0 needs no special
/// treatment. Integer `a` is refused with [`Error::Pole`]; use
/// [`ggn_moment_quadrature`] there.
///
/// The sum over powers of `P(1/s, |z|^s)` converges slowly (the tail after
/// R terms is of order 1/R), so with modest `max_terms` the value is
/// usually returned with `converged = false`.
pub fn ggn_moment(n: usize, p: &GgnParams, cfg: &SeriesConfig) -> Result<SeriesValue> {
    if n == 0 {
        return Err(domain("moment order must be at least 1"));
    }
    p.validate()?;
    cfg.validate()?;
    let am1 = p.a - 1.0;
    if am1 >= 0.0 && am1.fract() == 0.0 {
        return Err(Error::Pole {
            j: am1 as usize,
            a: p.a,
        });
    }
    let z = std_moments(n, p.s, p.a, cfg)?;
    let mut value = 0.0;
    let mut last_term: f64 = 0.0;
    let mut converged = true;
    let mut terms = 0;
    for (i, zi) in z.iter().enumerate() {
        let c = binomial(n as f64, i) * p.sigma.powi(i as i32) * p.mu.powi((n - i) as i32);
        if c == 0.0 {
            continue;
        }
        value += c * zi.value;
        terms = terms.max(zi.terms);
        if !zi.converged {
            converged = false;
            last_term = last_term.max((c * zi.last_term).abs());
        }
    }
    Ok(SeriesValue {
        value,
        terms,
        converged,
        last_term,
    })
}

/// E(X^n) by adaptive quadrature of `x^n f(x)` over
/// `[Q(1e-10), Q(1 - 1e-10)]` with absolute tolerance 1e-9.
pub fn ggn_moment_quadrature(n: usize, p: &GgnParams) -> Result<f64> {
    if n == 0 {
        return Err(domain("moment order must be at least 1"));
    }
    p.validate()?;
    let lo = ggn_quantile(p, 1e-10)?;
    let hi = ggn_quantile(p, 1.0 - 1e-10)?;
    let mut breaks = vec![lo];
    for u in [1e-4, 0.05, 0.5, 0.95, 1.0 - 1e-4] {
        let x = ggn_quantile(p, u)?;
        if x > *breaks.last().unwrap() && x < hi {
            breaks.push(x);
        }
    }
    if p.mu > lo && p.mu < hi && !breaks.contains(&p.mu) {
        breaks.push(p.mu);
        breaks.sort_by(f64::total_cmp);
    }
    breaks.push(hi);
    let opts = QuadOptions {
        abs_tol: 1e-9,
        rel_tol: 1e-12,
        max_intervals: 4000,
    };
    integrate_with_breaks(
        |x| x.powi(n as i32) * ggn_pdf(p, x).unwrap_or(0.0),
        &breaks,
        &opts,
    )
    .into_result()
}
