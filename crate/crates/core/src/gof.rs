//! Goodness-of-fit measures: histogram divergences, EDF statistics and
//! information criteria, collected into a [`GofReport`].
//!
//! Model densities are compared with the empirical density at histogram bin
//! centers. Bins without observations are left out of both divergence sums
//! and counted in the report.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::estimation::FitResult;
use crate::sample::{sorted_quantile, Sample};

/// Smallest sample accepted by [`empirical_density`].
pub const MIN_BINNED_SIZE: usize = 20;

/// Probabilities passed to the Anderson-Darling logs are kept in
/// `[EDF_CLAMP, 1 - EDF_CLAMP]`.
pub const EDF_CLAMP: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BinRule {
    /// Width `2 IQR / n^{1/3}`.
    FreedmanDiaconis,
    /// `⌈√n⌉` bins, used when the interquartile range is zero.
    SquareRoot,
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Binning {
    pub rule: BinRule,
    pub bins: usize,
    pub edges: Vec<f64>,
}

/// Histogram density normalized to integrate to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinnedDensity {
    pub binning: Binning,
    pub centers: Vec<f64>,
    pub counts: Vec<usize>,
    pub density: Vec<f64>,
}

impl BinnedDensity {
    /// Density of the bin containing `x`; zero outside the edges.
    pub fn at(&self, x: f64) -> f64 {
        let e = &self.binning.edges;
        if !(x >= e[0] && x <= e[e.len() - 1]) {
            return 0.0;
        }
        let k = e.partition_point(|&v| v <= x).clamp(1, e.len() - 1);
        self.density[k - 1]
    }
}

/// Histogram of `data` with `bins` equal-width bins, or the automatic rule.
///
/// The automatic rule is Freedman-Diaconis; when the interquartile range is
/// zero it falls back to `⌈√n⌉` bins.
pub fn empirical_density(data: &Sample, bins: Option<usize>) -> Result<BinnedDensity> {
    let n = data.len();
    if n < MIN_BINNED_SIZE {
        return Err(domain(format!(
            "at least {MIN_BINNED_SIZE} observations are needed for a histogram, got {n}"
        )));
    }
    let sorted = data.sorted();
    let (lo, hi) = (sorted[0], sorted[n - 1]);
    let range = hi - lo;
    if !(range > 0.0) {
        return Err(Error::Degenerate("all observations are equal".into()));
    }
    let (rule, k) = match bins {
        Some(0) => return Err(domain("bin count must be positive")),
        Some(k) => (BinRule::Fixed, k),
        None => {
            let iqr = sorted_quantile(&sorted, 0.75) - sorted_quantile(&sorted, 0.25);
            if iqr > 0.0 {
                let width = 2.0 * iqr / (n as f64).cbrt();
                (
                    BinRule::FreedmanDiaconis,
                    ((range / width).ceil() as usize).max(1),
                )
            } else {
                (BinRule::SquareRoot, (n as f64).sqrt().ceil() as usize)
            }
        }
    };
    let width = range / k as f64;
    let mut edges: Vec<f64> = (0..=k).map(|i| lo + width * i as f64).collect();
    edges[k] = hi;
    let mut counts = vec![0usize; k];
    for &x in &sorted {
        let i = (((x - lo) / width) as usize).min(k - 1);
        counts[i] += 1;
    }
    let density = counts
        .iter()
        .enumerate()
        .map(|(i, &c)| c as f64 / (n as f64 * (edges[i + 1] - edges[i])))
        .collect();
    let centers = edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    Ok(BinnedDensity {
        binning: Binning {
            rule,
            bins: k,
            edges,
        },
        centers,
        counts,
        density,
    })
}

fn check_pair(f: &[f64], p: &[f64]) -> Result<()> {
    if f.len() != p.len() {
        return Err(domain(format!(
            "length mismatch: {} vs {}",
            f.len(),
            p.len()
        )));
    }
    for (i, (&fi, &pi)) in f.iter().zip(p).enumerate() {
        if !(fi > 0.0 && fi.is_finite()) || !(pi > 0.0 && pi.is_finite()) {
            return Err(domain(format!(
                "divergences need positive finite values, got f={fi}, P={pi} at point {i}"
            )));
        }
    }
    Ok(())
}

/// `Σ_i [f_i ln(f_i/P_i) + P_i ln(P_i/f_i)]`.
pub fn sym_kl(f: &[f64], p: &[f64]) -> Result<f64> {
    check_pair(f, p)?;
    Ok(f.iter().zip(p).map(|(&a, &b)| (a - b) * (a / b).ln()).sum())
}

/// `Σ_i [(f_i - P_i)² / f_i + (f_i - P_i)² / P_i]`.
pub fn sym_chi2(f: &[f64], p: &[f64]) -> Result<f64> {
    check_pair(f, p)?;
    Ok(f.iter()
        .zip(p)
        .map(|(&a, &b)| (a - b) * (a - b) * (1.0 / a + 1.0 / b))
        .sum())
}

fn model_cdf_sorted(data: &Sample, cdf: &dyn Fn(f64) -> f64) -> Result<Vec<f64>> {
    if data.is_empty() {
        return Err(domain("empty sample"));
    }
    let u: Vec<f64> = data.sorted().into_iter().map(cdf).collect();
    if let Some(v) = u.iter().find(|v| !(**v >= 0.0 && **v <= 1.0)) {
        return Err(domain(format!("model cdf returned {v}")));
    }
    Ok(u)
}

/// Kolmogorov-Smirnov distance between the sample and a model cdf.
pub fn ks_stat(data: &Sample, cdf: &dyn Fn(f64) -> f64) -> Result<f64> {
    let u = model_cdf_sorted(data, cdf)?;
    let n = u.len() as f64;
    Ok(u.iter().enumerate().fold(0.0_f64, |m, (i, &f)| {
        let i = i as f64;
        m.max(((i + 1.0) / n - f).abs()).max((f - i / n).abs())
    }))
}

/// Cramér-von Mises `W² = Σ (F(x_(i)) - (2i-1)/(2n))² + 1/(12n)`.
pub fn cvm_stat(data: &Sample, cdf: &dyn Fn(f64) -> f64) -> Result<f64> {
    let u = model_cdf_sorted(data, cdf)?;
    let n = u.len() as f64;
    let sum: f64 = u
        .iter()
        .enumerate()
        .map(|(i, &f)| (f - (2.0 * i as f64 + 1.0) / (2.0 * n)).powi(2))
        .sum();
    Ok(sum + 1.0 / (12.0 * n))
}

/// Anderson-Darling `A²` with the model cdf clamped away from 0 and 1.
/// Returns the statistic and the number of clamped values.
pub fn ad_stat(data: &Sample, cdf: &dyn Fn(f64) -> f64) -> Result<(f64, usize)> {
    let u = model_cdf_sorted(data, cdf)?;
    let mut clamped = 0;
    let u: Vec<f64> = u
        .into_iter()
        .map(|v| {
            let c = v.clamp(EDF_CLAMP, 1.0 - EDF_CLAMP);
            if c != v {
                clamped += 1;
            }
            c
        })
        .collect();
    let n = u.len();
    let sum: f64 = (0..n)
        .map(|i| (2.0 * i as f64 + 1.0) * (u[i].ln() + (-u[n - 1 - i]).ln_1p()))
        .sum();
    Ok((-(n as f64) - sum / n as f64, clamped))
}

/// Small-sample factors turning `W²` and `A²` into `W*` and `A*`.
pub const W_STAR_FACTOR: f64 = 0.16;
pub const A_STAR_FACTOR: f64 = 0.6;

/// `W* = W² (1 + 0.16/n)`.
pub fn w_star(w2: f64, n: usize) -> f64 {
    w2 * (1.0 + W_STAR_FACTOR / n as f64)
}

/// `A* = A² (1 + 0.6/n)`.
pub fn a_star(a2: f64, n: usize) -> f64 {
    a2 * (1.0 + A_STAR_FACTOR / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InfoCriteria {
    pub aic: f64,
    /// `None` when `n <= k + 1`.
    pub aicc: Option<f64>,
    pub bic: f64,
}

pub fn info_criteria(loglik: f64, k: usize, n: usize) -> InfoCriteria {
    let kf = k as f64;
    let aic = -2.0 * loglik + 2.0 * kf;
    let aicc = (n > k + 1).then(|| aic + 2.0 * kf * (kf + 1.0) / (n - k - 1) as f64);
    InfoCriteria {
        aic,
        aicc,
        bic: -2.0 * loglik + kf * (n as f64).ln(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GofReport {
    pub d_kl: f64,
    pub d_chi2: f64,
    pub d_ks: f64,
    pub w_star: f64,
    pub a_star: f64,
    pub aic: f64,
    pub aicc: Option<f64>,
    pub bic: f64,
    pub n_obs: usize,
    pub k_params: usize,
    pub binning: Binning,
    /// Empty bins left out of the divergence sums.
    pub excluded_bins: usize,
    /// Model cdf values clamped before the Anderson-Darling logs.
    pub clamped: usize,
    /// How `W*` and `A*` were obtained from `W²` and `A²`.
    pub edf_modification: String,
}

/// A model as seen by [`gof_report`].
pub struct ModelFns<'a> {
    pub pdf: &'a dyn Fn(f64) -> f64,
    pub cdf: &'a dyn Fn(f64) -> f64,
    pub loglik: f64,
    pub k_params: usize,
}

/// All eight measures for one model against one sample.
pub fn gof_report(data: &Sample, model: &ModelFns, bins: Option<usize>) -> Result<GofReport> {
    let hist = empirical_density(data, bins)?;
    let (mut f, mut p) = (Vec::new(), Vec::new());
    for (i, &c) in hist.centers.iter().enumerate() {
        if hist.counts[i] == 0 {
            continue;
        }
        let fi = (model.pdf)(c);
        if !(fi > 0.0) {
            return Err(domain(format!(
                "model density is {fi} at occupied bin center {c}"
            )));
        }
        f.push(fi);
        p.push(hist.density[i]);
    }
    let n = data.len();
    let (a2, clamped) = ad_stat(data, model.cdf)?;
    let ic = info_criteria(model.loglik, model.k_params, n);
    Ok(GofReport {
        d_kl: sym_kl(&f, &p)?,
        d_chi2: sym_chi2(&f, &p)?,
        d_ks: ks_stat(data, model.cdf)?,
        w_star: w_star(cvm_stat(data, model.cdf)?, n),
        a_star: a_star(a2, n),
        aic: ic.aic,
        aicc: ic.aicc,
        bic: ic.bic,
        n_obs: n,
        k_params: model.k_params,
        excluded_bins: hist.counts.iter().filter(|&&c| c == 0).count(),
        binning: hist.binning,
        clamped,
        edf_modification: format!(
            "W* = W^2 (1 + {W_STAR_FACTOR}/n), A* = A^2 (1 + {A_STAR_FACTOR}/n)"
        ),
    })
}

/// [`gof_report`] for a fitted model, using its own log-likelihood.
pub fn gof_report_for_fit(
    data: &Sample,
    fit: &FitResult,
    bins: Option<usize>,
) -> Result<GofReport> {
    let pdf = |x: f64| fit.pdf(x);
    let cdf = |x: f64| fit.cdf(x);
    let model = ModelFns {
        pdf: &pdf,
        cdf: &cdf,
        loglik: fit.loglik,
        k_params: fit.n_params(),
    };
    gof_report(data, &model, bins)
}

/// Self-comparison: the histogram as density and the empirical cdf.
/// Both divergences vanish.
pub fn gof_report_empirical(data: &Sample, bins: Option<usize>) -> Result<GofReport> {
    let hist = empirical_density(data, bins)?;
    let sorted = data.sorted();
    let n = sorted.len() as f64;
    let pdf = |x: f64| hist.at(x);
    let cdf = |x: f64| sorted.partition_point(|&v| v <= x) as f64 / n;
    let loglik = data.values.iter().map(|&x| hist.at(x).ln()).sum();
    let model = ModelFns {
        pdf: &pdf,
        cdf: &cdf,
        loglik,
        k_params: hist.binning.bins,
    };
    gof_report(data, &model, bins)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ggn::{ggn_cdf, GgnParams};
    use crate::sampling::{ggn_sample, StreamSpec};

    fn normal_cdf(x: f64) -> f64 {
        // Standard normal through the GGN with a = 1, s = 2, σ = √2.
        ggn_cdf(
            &GgnParams::new(0.0, std::f64::consts::SQRT_2, 2.0, 1.0).unwrap(),
            x,
        )
        .unwrap()
    }

    fn normal_draws(n: usize, seed: u64) -> Sample {
        let p = GgnParams::new(0.0, std::f64::consts::SQRT_2, 2.0, 1.0).unwrap();
        ggn_sample(&p, n, &StreamSpec::new(seed, 0)).unwrap()
    }

    #[test]
    fn uniform_grid_histogram() {
        let data = Sample::new((0..100).map(|i| i as f64 / 99.0 * 5.0).collect(), "t").unwrap();
        let h = empirical_density(&data, Some(10)).unwrap();
        for d in &h.density {
            assert!((d - 0.2).abs() < 1e-12);
        }
        let total: f64 = h
            .density
            .iter()
            .zip(h.binning.edges.windows(2))
            .map(|(d, w)| d * (w[1] - w[0]))
            .sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn freedman_diaconis_on_normal_draws() {
        let h = empirical_density(&normal_draws(10_000, 1), None).unwrap();
        assert_eq!(h.binning.rule, BinRule::FreedmanDiaconis);
        assert!((30..=120).contains(&h.binning.bins), "{}", h.binning.bins);
    }

    #[test]
    fn square_root_fallback_and_errors() {
        let mut v = vec![1.0; 30];
        v.push(2.0);
        let h = empirical_density(&Sample::new(v, "t").unwrap(), None).unwrap();
        assert_eq!(h.binning.rule, BinRule::SquareRoot);
        assert_eq!(h.binning.bins, 6);
        assert!(empirical_density(&Sample::new(vec![1.0; 30], "t").unwrap(), None).is_err());
        assert!(empirical_density(&Sample::new(vec![1.0, 2.0], "t").unwrap(), None).is_err());
    }

    #[test]
    fn divergence_toy_values() {
        let (f, p) = ([0.6, 0.4], [0.5, 0.5]);
        let kl = sym_kl(&f, &p).unwrap();
        let expect = 0.6 * 1.2_f64.ln()
            + 0.4 * 0.8_f64.ln()
            + 0.5 * (0.5_f64 / 0.6).ln()
            + 0.5 * 1.25_f64.ln();
        assert!((kl - expect).abs() < 1e-15);
        assert!((kl - 0.0406).abs() < 1e-4);
        assert!((sym_kl(&p, &f).unwrap() - kl).abs() < 1e-15);
        let chi = sym_chi2(&f, &p).unwrap();
        assert!((chi - (0.01 / 0.6 + 0.01 / 0.5 + 0.01 / 0.4 + 0.01 / 0.5)).abs() < 1e-15);
        assert!((chi - 0.0817).abs() < 1e-4);
        assert_eq!(sym_kl(&f, &f).unwrap(), 0.0);
        assert!(sym_kl(&[0.0, 1.0], &p).is_err());
    }

    #[test]
    fn ks_basics() {
        let one = Sample::new(vec![0.0], "t").unwrap();
        assert_eq!(ks_stat(&one, &normal_cdf).unwrap(), 0.5);
        let data = normal_draws(10_000, 3);
        let d = ks_stat(&data, &normal_cdf).unwrap();
        assert!(d < 1.6 / 100.0, "{d}");
    }

    #[test]
    fn cvm_perfect_spacing() {
        let n = 40;
        let data = Sample::new(
            (0..n)
                .map(|i| (2.0 * i as f64 + 1.0) / (2.0 * n as f64))
                .collect(),
            "t",
        )
        .unwrap();
        let w2 = cvm_stat(&data, &|x| x).unwrap();
        assert!((w2 - 1.0 / (12.0 * n as f64)).abs() < 1e-15);
    }

    #[test]
    fn anderson_darling_on_true_model() {
        let mut below = 0;
        for seed in 0..20 {
            let (a2, clamped) = ad_stat(&normal_draws(10_000, 100 + seed), &normal_cdf).unwrap();
            assert_eq!(clamped, 0);
            if a_star(a2, 10_000) < 3.9 {
                below += 1;
            }
        }
        assert!(below >= 19, "{below}");
    }

    #[test]
    fn cvm_grows_with_shift() {
        let data = normal_draws(500, 9);
        let mut last = 0.0;
        for shift in [0.0, 0.2, 0.5, 1.0] {
            let w = cvm_stat(&data, &|x| normal_cdf(x - shift)).unwrap();
            assert!(w > last);
            last = w;
        }
    }

    #[test]
    fn info_criteria_arithmetic() {
        let ic = info_criteria(0.0, 4, 100);
        assert_eq!(ic.aic, 8.0);
        assert!((ic.aicc.unwrap() - (8.0 + 40.0 / 95.0)).abs() < 1e-12);
        assert!((ic.bic - 4.0 * 100.0_f64.ln()).abs() < 1e-12);
        assert!(info_criteria(0.0, 4, 5).aicc.is_none());
        let (small, big) = (info_criteria(-10.0, 2, 50), info_criteria(-10.0, 4, 50));
        assert!(small.aic < big.aic && small.aicc < big.aicc && small.bic < big.bic);
    }

    #[test]
    fn self_comparison_has_zero_divergences() {
        let r = gof_report_empirical(&normal_draws(300, 4), None).unwrap();
        assert!(r.d_kl.abs() < 1e-12 && r.d_chi2.abs() < 1e-12);
        assert!(r.d_ks <= 1.0 / 300.0 + 1e-12);
    }

    #[test]
    fn report_for_fit_is_deterministic_and_finite() {
        use crate::estimation::{fit_ggn, FitOptions};
        let data = normal_draws(300, 5);
        let fit = fit_ggn(&data, &FitOptions::default()).unwrap();
        let a = gof_report_for_fit(&data, &fit, None).unwrap();
        let b = gof_report_for_fit(&data, &fit, None).unwrap();
        assert_eq!(a, b);
        for v in [
            a.d_kl,
            a.d_chi2,
            a.d_ks,
            a.w_star,
            a.a_star,
            a.aic,
            a.aicc.unwrap(),
            a.bic,
        ] {
            assert!(v.is_finite());
        }
        assert!(a.aicc.unwrap() >= a.aic);
    }
}
