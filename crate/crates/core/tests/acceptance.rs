//! Acceptance checks. Each criterion prints one line:
//! `criterion N: PASS|FAIL (elapsed / budget) detail`.
//! The process exits non-zero if any criterion fails.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use ggn::estimation::{
    fit_beta_rescaled, fit_gamma_shifted, fit_ggn, ggn_loglik, ggn_score, FitOptions, FitResult,
};
use ggn::ggn::{ggn_cdf, ggn_pdf, ggn_quantile};
use ggn::gof::ks_stat;
use ggn::quadrature::{integrate_with_breaks, QuadOptions};
use ggn::sampling::{ggn_sample, ggn_variate_with, uniform_open, StreamSpec};
use ggn::series::{
    expansion_pdf, ggn_moment, ggn_moment_quadrature, ExpansionCoefficients, SeriesConfig,
};
use ggn::specfun::reg_lower_inc_gamma;
use ggn::study::{run_study, StartRule, StudyConfig};
use ggn::GgnParams;

struct Outcome {
    pass: bool,
    detail: String,
}

fn g(mu: f64, sigma: f64, s: f64, a: f64) -> GgnParams {
    GgnParams::new(mu, sigma, s, a).unwrap()
}

fn special_cases() -> Outcome {
    let normal = g(0.0, 1.0, 2.0, 1.0);
    let laplace = g(0.0, 1.0, 1.0, 1.0);
    let mut err: f64 = 0.0;
    for i in 0..200 {
        let x = -6.0 + 12.0 * i as f64 / 199.0;
        let n = (-x * x).exp() / PI.sqrt();
        let l = 0.5 * (-x.abs()).exp();
        err = err.max((ggn_pdf(&normal, x).unwrap() - n).abs());
        err = err.max((ggn_pdf(&laplace, x).unwrap() - l).abs());
    }
    Outcome {
        pass: err <= 1e-12,
        detail: format!("max abs error {err:.2e} (tol 1e-12)"),
    }
}

fn normalization() -> Outcome {
    let mut worst: f64 = 0.0;
    for s in [0.5, 1.0, 2.0, 3.0] {
        for a in [0.5, 1.0, 2.0, 5.0] {
            let p = g(0.0, 1.0, s, a);
            let r = integrate_with_breaks(
                |x| ggn_pdf(&p, x).unwrap(),
                &[f64::NEG_INFINITY, -1.0, 0.0, 1.0, f64::INFINITY],
                &QuadOptions::default(),
            );
            worst = worst.max((r.value - 1.0).abs());
        }
    }
    Outcome {
        pass: worst <= 1e-7,
        detail: format!("max |∫f - 1| {worst:.2e} over 16 parameter points (tol 1e-7)"),
    }
}

fn quantile_round_trip() -> Outcome {
    let sets = [
        g(0.0, 1.0, 2.0, 1.0),
        g(0.0, 1.0, 1.0, 1.0),
        g(1.0, 2.0, 0.5, 0.5),
        g(-3.0, 0.5, 3.0, 5.0),
        g(0.03, 8e-4, 0.36, 1.8),
        g(2.0, 1.5, 1.5, 0.2),
    ];
    let mut worst: f64 = 0.0;
    for p in &sets {
        for i in 1..=999 {
            let u = i as f64 / 1000.0;
            let back = ggn_cdf(p, ggn_quantile(p, u).unwrap()).unwrap();
            worst = worst.max((back - u).abs());
        }
    }
    Outcome {
        pass: worst <= 1e-8,
        detail: format!("max |F(Q(u)) - u| {worst:.2e} over 6 sets (tol 1e-8)"),
    }
}

fn score_correctness() -> Outcome {
    let mut rng = StreamSpec::new(4, 0).rng();
    let mut worst: f64 = 0.0;
    for case in 0..10 {
        let mut draw = |lo: f64, hi: f64| lo + (hi - lo) * uniform_open(&mut rng);
        let p = g(
            draw(-2.0, 2.0),
            draw(0.3, 3.0),
            draw(1.0, 4.0),
            draw(0.3, 5.0),
        );
        let data = ggn_sample(&p, 50, &StreamSpec::new(40, case)).unwrap();
        let u = ggn_score(&p, &data).unwrap();
        let base = p.to_array();
        for k in 0..4 {
            let h = 1e-6 * base[k].abs().max(1.0);
            let (mut up, mut dn) = (base, base);
            up[k] += h;
            dn[k] -= h;
            let fd = (ggn_loglik(&GgnParams::from_array(up).unwrap(), &data).unwrap()
                - ggn_loglik(&GgnParams::from_array(dn).unwrap(), &data).unwrap())
                / (2.0 * h);
            worst = worst.max((u[k] - fd).abs());
        }
    }
    Outcome {
        pass: worst <= 1e-5,
        detail: format!("max |U - FD| {worst:.2e} over 10 cases (tol 1e-5)"),
    }
}

fn sampler_law() -> Outcome {
    let p = g(0.0, 1.0, 2.0, 1.5);
    let n = 100_000;
    let expect = reg_lower_inc_gamma(p.a, std::f64::consts::LN_2).unwrap();
    let se = (expect * (1.0 - expect) / n as f64).sqrt();
    let mut worst_ks: f64 = 0.0;
    let mut worst_z: f64 = 0.0;
    for seed in [1u64, 2, 3, 4, 5] {
        let data = ggn_sample(&p, n, &StreamSpec::new(seed, 0)).unwrap();
        worst_ks = worst_ks.max(ks_stat(&data, &|x| ggn_cdf(&p, x).unwrap()).unwrap());
        let mut rng = StreamSpec::new(seed, 0).rng();
        let left = (0..n).filter(|_| ggn_variate_with(&p, &mut rng).1).count();
        worst_z = worst_z.max((left as f64 / n as f64 - expect).abs() / se);
    }
    Outcome {
        pass: worst_ks < 0.006 && worst_z <= 3.0,
        detail: format!(
            "max KS {worst_ks:.4} (tol 0.006), max branch deviation {worst_z:.2} SE (tol 3)"
        ),
    }
}

fn moment_series() -> Outcome {
    let cfg = SeriesConfig {
        tolerance: 1e-10,
        max_terms: 400,
    };
    let mut worst: f64 = 0.0;
    let mut at = String::new();
    for (mu, sigma) in [(0.0, 1.0), (1.0, 2.0)] {
        for a in [0.7, 2.5] {
            for s in [1.0, 2.0] {
                let p = g(mu, sigma, s, a);
                for n in 1..=3 {
                    let series = ggn_moment(n, &p, &cfg).unwrap().value;
                    let oracle = ggn_moment_quadrature(n, &p).unwrap();
                    let rel = (series - oracle).abs() / oracle.abs().max(1e-300);
                    if rel > worst {
                        worst = rel;
                        at = format!("n={n} mu={mu} sigma={sigma} a={a} s={s}");
                    }
                }
            }
        }
    }
    Outcome {
        pass: worst <= 1e-4,
        detail: format!(
            "max relative error {worst:.2e} at {at} (tol 1e-4, outer terms {}); the series converges algebraically",
            cfg.max_terms
        ),
    }
}

fn expansion_fidelity() -> Outcome {
    let cfg = SeriesConfig {
        tolerance: 1e-10,
        max_terms: 20_000,
    };
    let mut worst: f64 = 0.0;
    let mut unconverged = 0;
    for a in [0.7, 2.5] {
        let mut coefs = ExpansionCoefficients::new(a, 64).unwrap();
        for s in [1.0, 2.0] {
            let p = g(0.0, 1.0, s, a);
            for i in 0..20 {
                let x = ggn_quantile(&p, (i as f64 + 0.5) / 20.0).unwrap();
                let e = expansion_pdf(&mut coefs, &p, x, &cfg).unwrap();
                unconverged += usize::from(!e.converged);
                worst = worst.max((e.value - ggn_pdf(&p, x).unwrap()).abs());
            }
        }
    }
    Outcome {
        pass: worst <= 1e-5,
        detail: format!("max abs error {worst:.2e} at 80 points (tol 1e-5), {unconverged} sums hit the term cap"),
    }
}

fn table_one() -> Outcome {
    let cfg = StudyConfig {
        scenario_label: "a2-mu0-sigma1-s1".into(),
        true_params: g(0.0, 1.0, 1.0, 2.0),
        sample_sizes: vec![25, 121],
        replications: 1000,
        base_seed: 20_240_601,
        start: StartRule::Truth,
    };
    let r = run_study(&cfg).unwrap();
    let (small, big) = (&r.cells[0], &r.cells[1]);
    let (a_hat, s_hat, mse_s) = (big.mean[3], big.mean[2], big.mse[2]);
    let pass = (a_hat - 2.097).abs() <= 0.15
        && (s_hat - 0.991).abs() <= 0.05
        && mse_s <= 0.05
        && mse_s < small.mse[2];
    Outcome {
        pass,
        detail: format!(
            "N=121: mean a {a_hat:.3}, mean s {s_hat:.3}, MSE(s) {mse_s:.4}, failures {}; N=25: MSE(s) {:.3}, failures {}",
            big.failures, small.mse[2], small.failures
        ),
    }
}

fn aic(fit: ggn::error::Result<FitResult>) -> f64 {
    match fit {
        Ok(f) if f.loglik.is_finite() => 2.0 * f.n_params() as f64 - 2.0 * f.loglik,
        _ => f64::INFINITY,
    }
}

fn model_selection() -> Outcome {
    let p = g(0.03, 8e-4, 0.36, 1.8);
    let reps = 200;
    let opts = FitOptions::default();
    let mut wins = 0;
    for r in 0..reps {
        let data = ggn_sample(&p, 500, &StreamSpec::new(2718, r)).unwrap();
        let ggn = aic(fit_ggn(&data, &opts));
        let gamma = aic(fit_gamma_shifted(&data, &opts));
        let beta = aic(fit_beta_rescaled(&data, &opts));
        wins += usize::from(ggn.is_finite() && ggn < gamma && ggn < beta);
    }
    let share = wins as f64 / reps as f64;
    Outcome {
        pass: share >= 0.9,
        detail: format!(
            "GGN lowest AIC in {wins}/{reps} = {:.1}% (need 90%)",
            100.0 * share
        ),
    }
}

fn declared_non_targets() -> Outcome {
    Outcome {
        pass: true,
        detail: "not targets: exact fitted values for the radar data sets (data unavailable) and reported timings; \
                 gof and estimation are covered by the property suite"
            .into(),
    }
}

fn main() {
    let criteria: [(u32, u64, fn() -> Outcome); 10] = [
        (1, 1, special_cases),
        (2, 10, normalization),
        (3, 5, quantile_round_trip),
        (4, 5, score_correctness),
        (5, 30, sampler_law),
        (6, 60, moment_series),
        (7, 30, expansion_fidelity),
        (8, 600, table_one),
        (9, 900, model_selection),
        (10, 1, declared_non_targets),
    ];
    let mut failed = Vec::new();
    for (id, budget, check) in criteria {
        let start = Instant::now();
        let out = check();
        let elapsed = start.elapsed();
        let in_time = elapsed <= Duration::from_secs(budget);
        let pass = out.pass && in_time;
        println!(
            "criterion {id}: {} ({:.2} s / {budget} s) {}",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            out.detail
        );
        if !pass {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria pass");
    } else {
        println!("acceptance: failing criteria {failed:?}");
        std::process::exit(1);
    }
}
