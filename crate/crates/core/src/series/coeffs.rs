use std::collections::HashMap;
use std::sync::{OnceLock, RwLock};

use serde::{Deserialize, Serialize};

use super::{SeriesConfig, SeriesValue, Stopper};
use crate::error::{invalid, Error, Result};
use crate::specfun::{binomial, ln_gamma_unchecked};

type Rows<K> = RwLock<HashMap<K, Vec<f64>>>;

fn p_cache() -> &'static Rows<usize> {
    static CACHE: OnceLock<Rows<usize>> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

/// Extends `row` (holding p_{j,0..}) so that it covers index `k`.
fn extend_p_row(row: &mut Vec<f64>, j: usize, k: usize) {
    if row.is_empty() {
        row.push(1.0);
    }
    let jp1 = (j + 1) as f64;
    for kk in row.len()..=k {
        let mut sum = 0.0;
        for m in 1..=kk {
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            sum += sign * (m as f64 * jp1 - kk as f64) / (m + 1) as f64 * row[kk - m];
        }
        row.push(sum / kk as f64);
    }
}

/// p_{j,k} from `p_{j,0} = 1` and
/// `p_{j,k} = k⁻¹ Σ_{m=1}^k (-1)^m [m(j+1) - k]/(m+1) p_{j,k-m}`.
/// Rows are memoized process-wide.
pub fn p_coeff(j: usize, k: usize) -> f64 {
    if let Some(v) = p_cache()
        .read()
        .expect("p cache poisoned")
        .get(&j)
        .and_then(|row| row.get(k))
    {
        return *v;
    }
    let mut guard = p_cache().write().expect("p cache poisoned");
    let row = guard.entry(j).or_default();
    extend_p_row(row, j, k);
    row[k]
}

/// [`p_coeff`] without touching the cache.
pub fn p_coeff_uncached(j: usize, k: usize) -> f64 {
    let mut row = Vec::new();
    extend_p_row(&mut row, j, k);
    row[k]
}

fn check_a(a: f64) -> Result<()> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(invalid(format!("a must be finite and > 0, got {a}")));
    }
    Ok(())
}

/// Index j of the first vanishing `a - 1 - j` with `j <= k`, if any.
fn pole_index(a: f64, k: usize) -> Option<usize> {
    let am1 = a - 1.0;
    if am1 >= 0.0 && am1.fract() == 0.0 && (am1 as usize) <= k {
        Some(am1 as usize)
    } else {
        None
    }
}

/// b_k of the expansion `f(x) = Σ_k b_k h_{a+k}(x)`, evaluated by the
/// closed form
/// `b_k = C(k+1-a, k) / ((a+k) Γ(a-1)) Σ_{j=0}^k (-1)^{j+k} C(k,j) p_{j,k}/(a-1-j)`.
///
/// The alternating inner sum loses accuracy as k grows (roughly 2^k
/// cancellation); [`ExpansionCoefficients`] provides a stable route.
pub fn b_coeff(k: usize, a: f64) -> Result<f64> {
    check_a(a)?;
    if let Some(j) = pole_index(a, k) {
        return Err(Error::Pole { j, a });
    }
    // 1/Γ(a-1) = (a-1)/Γ(a), valid on both sides of a = 1.
    let inv_gamma_am1 = (a - 1.0) * (-ln_gamma_unchecked(a)).exp();
    let mut sum = 0.0;
    for j in 0..=k {
        let sign = if (j + k).is_multiple_of(2) { 1.0 } else { -1.0 };
        sum += sign * binomial(k as f64, j) * p_coeff(j, k) / (a - 1.0 - j as f64);
    }
    Ok(binomial(k as f64 + 1.0 - a, k) * inv_gamma_am1 / (a + k as f64) * sum)
}

/// The coefficient sequence b_0..b_K for one `a`.
///
/// Uses `b_k = d_k / ((a+k) Γ(a))` where d_k are the power-series
/// coefficients of `(-ln(1-t)/t)^{a-1}`, generated by the J.C.P. Miller
/// recursion for powers of a series; all terms stay O(1) so there is no
/// cancellation. Agrees with [`b_coeff`] where the latter is accurate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionCoefficients {
    pub a_param: f64,
    pub b_seq: Vec<f64>,
    d_seq: Vec<f64>,
}

impl ExpansionCoefficients {
    /// Coefficients b_0..=b_k_max. Integer `a` is refused: the closed form
    /// has a pole there and callers should evaluate the density directly.
    pub fn new(a: f64, k_max: usize) -> Result<Self> {
        check_a(a)?;
        if let Some(j) = pole_index(a, usize::MAX) {
            return Err(Error::Pole { j, a });
        }
        let mut c = Self {
            a_param: a,
            b_seq: Vec::new(),
            d_seq: vec![1.0],
        };
        c.extend_to(k_max);
        Ok(c)
    }

    pub fn extend_to(&mut self, k_max: usize) {
        let a = self.a_param;
        let alpha = a - 1.0;
        for k in self.d_seq.len()..=k_max {
            let mut sum = 0.0;
            for m in 1..=k {
                sum += ((alpha + 1.0) * m as f64 - k as f64) / (m + 1) as f64 * self.d_seq[k - m];
            }
            self.d_seq.push(sum / k as f64);
        }
        let inv_gamma_a = (-ln_gamma_unchecked(a)).exp();
        for k in self.b_seq.len()..=k_max {
            self.b_seq
                .push(self.d_seq[k] * inv_gamma_a / (a + k as f64));
        }
    }

    pub fn len(&self) -> usize {
        self.b_seq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.b_seq.is_empty()
    }

    pub fn b(&self, k: usize) -> f64 {
        self.b_seq[k]
    }

    /// Rows p_{j,0..=k_max} for j = 0..=j_max.
    pub fn p_table(j_max: usize, k_max: usize) -> Vec<Vec<f64>> {
        (0..=j_max)
            .map(|j| (0..=k_max).map(|k| p_coeff(j, k)).collect())
            .collect()
    }
}

/// v_j(α) = Σ_{m>=j} (-1)^{j+m} C(α,m) C(m,j), truncated adaptively.
///
/// Terms are generated through `C(α,m) C(m,j) = C(α,j) C(α-j, m-j)`. For
/// `j > α` the terms do not decay fast enough (or grow) and the result is
/// flagged as not converged.
pub fn v_coeff(j: usize, alpha: f64, cfg: &SeriesConfig) -> Result<SeriesValue> {
    cfg.validate()?;
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(invalid(format!(
            "alpha must be finite and > 0, got {alpha}"
        )));
    }
    let beta = alpha - j as f64;
    let mut term = binomial(alpha, j);
    let mut sum = term;
    let mut stop = Stopper::new(cfg.tolerance);
    stop.done(term, sum);
    for l in 1..cfg.max_terms {
        term *= -(beta - (l - 1) as f64) / l as f64;
        sum += term;
        if stop.done(term, sum) {
            return Ok(SeriesValue {
                value: sum,
                terms: l + 1,
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

fn c_cache() -> &'static Rows<(usize, u64)> {
    static CACHE: OnceLock<Rows<(usize, u64)>> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

fn extend_c_row(row: &mut Vec<f64>, r: usize, s: f64, m: usize) {
    if row.is_empty() {
        row.push(s.powi(r as i32));
    }
    let inv_s = 1.0 / s;
    for mm in row.len()..=m {
        let mut sum = 0.0;
        let mut inv_fact = 1.0;
        for l in 1..=mm {
            inv_fact /= l as f64;
            let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
            let w = ((r + 1) * l) as f64 - mm as f64;
            sum += sign * w * inv_fact / (inv_s + l as f64) * row[mm - l];
        }
        row.push(sum / (mm as f64 * s));
    }
}

/// c_{m,r}: `c_{0,r} = s^r`,
/// `c_{m,r} = (ms)⁻¹ Σ_{l=1}^m (-1)^l [(r+1)l - m] / ((1/s + l) l!) c_{m-l,r}`.
/// Memoized per (r, s).
pub fn c_mr_coeff(m: usize, r: usize, s: f64) -> Result<f64> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(invalid(format!("s must be finite and > 0, got {s}")));
    }
    let key = (r, s.to_bits());
    if let Some(v) = c_cache()
        .read()
        .expect("c cache poisoned")
        .get(&key)
        .and_then(|row| row.get(m))
    {
        return Ok(*v);
    }
    let mut guard = c_cache().write().expect("c cache poisoned");
    let row = guard.entry(key).or_default();
    extend_c_row(row, r, s, m);
    Ok(row[m])
}

/// [`c_mr_coeff`] without touching the cache.
pub fn c_mr_coeff_uncached(m: usize, r: usize, s: f64) -> Result<f64> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(invalid(format!("s must be finite and > 0, got {s}")));
    }
    let mut row = Vec::new();
    extend_c_row(&mut row, r, s, m);
    Ok(row[m])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p_base_cases() {
        for j in 0..6 {
            assert_eq!(p_coeff(j, 0), 1.0);
        }
        assert_eq!(p_coeff(0, 1), 0.0);
        assert_eq!(p_coeff(1, 1), -0.5);
    }

    #[test]
    fn p_cache_is_transparent() {
        for j in 0..8 {
            for k in 0..25 {
                assert_eq!(p_coeff(j, k).to_bits(), p_coeff_uncached(j, k).to_bits());
            }
        }
    }

    #[test]
    fn b_zero_and_one_closed_forms() {
        // b_0 = 1/Γ(a+1), b_1 = (a-1)/(2(a+1)Γ(a))
        for a in [0.3, 0.7, 1.5, 2.5, 4.2] {
            let g = ln_gamma_unchecked(a).exp();
            assert!((b_coeff(0, a).unwrap() - 1.0 / (a * g)).abs() < 1e-14);
            let b1 = (a - 1.0) / (2.0 * (a + 1.0) * g);
            assert!((b_coeff(1, a).unwrap() - b1).abs() < 1e-14, "a={a}");
        }
    }

    #[test]
    fn b_closed_form_matches_stable_route() {
        for a in [0.7, 1.3, 2.5, 3.7] {
            let e = ExpansionCoefficients::new(a, 15).unwrap();
            for k in 0..=15 {
                let direct = b_coeff(k, a).unwrap();
                let stable = e.b(k);
                assert!(
                    (direct - stable).abs() <= 1e-7 * stable.abs().max(1e-6),
                    "a={a} k={k}: {direct} vs {stable}"
                );
            }
        }
    }

    #[test]
    fn poles_are_signalled() {
        assert!(matches!(b_coeff(1, 2.0), Err(Error::Pole { j: 1, .. })));
        assert!(matches!(b_coeff(0, 1.0), Err(Error::Pole { j: 0, .. })));
        // The a = 3 pole sits at j = 2 and is not reached for k = 1.
        assert!(b_coeff(1, 3.0).is_ok());
        assert!(matches!(
            ExpansionCoefficients::new(3.0, 1),
            Err(Error::Pole { j: 2, .. })
        ));
        assert!(b_coeff(0, 0.0).is_err());
    }

    #[test]
    fn v_integer_alpha_reconstructs_power() {
        let cfg = SeriesConfig::default();
        let x: f64 = 0.3;
        let mut total = 0.0;
        for j in 0..10 {
            let v = v_coeff(j, 3.0, &cfg).unwrap();
            assert!(v.converged);
            total += v.value * x.powi(j as i32);
        }
        assert!((total - 0.027).abs() < 1e-15);
    }

    #[test]
    fn v_for_alpha_one() {
        // Reconstruction of Φ^1: v_1 = 1 and all other coefficients vanish.
        let cfg = SeriesConfig::default();
        let v0 = v_coeff(0, 1.0, &cfg).unwrap();
        let v1 = v_coeff(1, 1.0, &cfg).unwrap();
        assert!(v0.converged && v1.converged);
        assert_eq!(v0.value, 0.0);
        assert_eq!(v1.value, 1.0);
    }

    #[test]
    fn v_fractional_alpha_is_flagged() {
        // For j > α the defining series diverges; the coefficient must come
        // back marked as not converged instead of as a silent number.
        let cfg = SeriesConfig::default();
        for j in [2, 3, 5] {
            let v = v_coeff(j, 1.5, &cfg).unwrap();
            assert!(!v.converged, "j={j}");
            assert!(v.into_result().is_err());
        }
    }

    #[test]
    fn c_mr_values() {
        for r in 0..5 {
            assert_eq!(c_mr_coeff(0, r, 1.7).unwrap(), 1.7_f64.powi(r as i32));
        }
        assert_eq!(c_mr_coeff(0, 0, 2.0).unwrap(), 1.0);
        assert_eq!(c_mr_coeff(1, 0, 1.0).unwrap(), 0.0);
        // r = 1: the series s Σ (-x)^n / (n! (1 + n s)), so c_{m,1} = (-1)^m / (m! (1/s + m)).
        let s: f64 = 1.5;
        let mut fact = 1.0;
        for m in 1..10 {
            fact *= m as f64;
            let expect = if m % 2 == 0 { 1.0 } else { -1.0 } / (fact * (1.0 / s + m as f64));
            assert!((c_mr_coeff(m, 1, s).unwrap() - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn c_cache_is_transparent() {
        for r in 0..4 {
            for m in 0..30 {
                assert_eq!(
                    c_mr_coeff(m, r, 0.8).unwrap().to_bits(),
                    c_mr_coeff_uncached(m, r, 0.8).unwrap().to_bits()
                );
            }
        }
    }
}
