use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ggn::estimation::{
    fit_beta, fit_beta_rescaled, fit_gamma, fit_gamma_shifted, fit_ggn, fit_gn, FitOptions,
    FitResult, ModelTag,
};
use ggn::gof::{empirical_density, gof_report_empirical, gof_report_for_fit, GofReport};
use ggn::sampling::ggn_sample;
use ggn::series::{ggn_moment, ggn_moment_quadrature, SeriesConfig};
use ggn::study::{run_studies, StudyCell, StudyConfig, StudyResult};
use ggn::{GgnParams, StreamSpec};
use serde::{Deserialize, Serialize};

use crate::data::{read_bytes, read_data, write_text, DataFile};
use crate::error::{CliError, CliResult};
use crate::report::{digest, load_fit, Comparison, Envelope, FitPayload, GofPayload};
use crate::{
    Cli, Command, FitArgs, Format, GofArgs, ModelArg, MomentArgs, ParamArgs, PlotArgs, SampleArgs,
    StudyArgs, TagArg,
};

pub fn run(cli: &Cli, argv: &[String]) -> CliResult<()> {
    match &cli.command {
        Command::Sample(a) => sample(a, cli.format, argv),
        Command::Fit(a) => fit(a, cli.format, argv),
        Command::Gof(a) => gof(a, cli.format, argv),
        Command::Study(a) => study(a, cli.format, argv),
        Command::Plotdata(a) => plotdata(a, cli.format, argv),
        Command::Moments(a) => moments(a, cli.format, argv),
    }
}

fn params(p: &ParamArgs) -> CliResult<GgnParams> {
    Ok(GgnParams::new(p.mu, p.sigma, p.s, p.a)?)
}

fn tag_name(t: ModelTag) -> &'static str {
    match t {
        ModelTag::Ggn => "GGN",
        ModelTag::Gn => "GN",
        ModelTag::Gamma => "GAMMA",
        ModelTag::Beta => "BETA",
    }
}

fn tag_of(t: TagArg) -> ModelTag {
    match t {
        TagArg::Ggn => ModelTag::Ggn,
        TagArg::Gn => ModelTag::Gn,
        TagArg::Gamma => ModelTag::Gamma,
        TagArg::Beta => ModelTag::Beta,
    }
}

/// Fixed notation for moderate magnitudes, scientific otherwise.
fn num(x: f64) -> String {
    let m = x.abs();
    if x == 0.0 || (1e-3..1e6).contains(&m) {
        format!("{x:.6}")
    } else if x.is_finite() {
        format!("{x:.6e}")
    } else {
        "NA".into()
    }
}

fn emit(
    format: Format,
    json: impl FnOnce() -> String,
    csv: impl FnOnce() -> String,
    table: impl FnOnce() -> String,
) {
    let text = match format {
        Format::Json => json(),
        Format::Csv => csv(),
        Format::Table => table(),
    };
    print!("{text}");
}

fn write_report<T: Serialize>(path: Option<&Path>, env: &Envelope<T>) -> CliResult<()> {
    match path {
        Some(p) => write_text(p, &env.to_json()),
        None => Ok(()),
    }
}

fn sidecar(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

#[derive(Debug, Serialize, Deserialize)]
struct SamplePayload {
    params: GgnParams,
    count: usize,
    path: String,
    /// SHA-256 of the written file.
    output_digest: String,
}

fn sample(a: &SampleArgs, format: Format, argv: &[String]) -> CliResult<()> {
    let p = params(&a.params)?;
    let stream = StreamSpec::new(a.seed, a.stream);
    let s = ggn_sample(&p, a.count, &stream)?;
    let mut text = String::with_capacity(24 * a.count);
    for v in &s.values {
        // Debug formatting is the shortest representation that round-trips.
        writeln!(text, "{v:?}").unwrap();
    }
    write_text(&a.out, &text)?;
    let param_json = serde_json::to_vec(&p).expect("parameters serialize");
    let env = Envelope::new(
        argv,
        Some(stream),
        digest(&[
            ("params", &param_json),
            ("count", &(a.count as u64).to_le_bytes()),
        ]),
        SamplePayload {
            params: p,
            count: a.count,
            path: a.out.display().to_string(),
            output_digest: digest(&[("values", text.as_bytes())]),
        },
    );
    write_text(&sidecar(&a.out), &env.to_json())?;
    emit(
        format,
        || env.to_json(),
        || {
            format!(
                "path,count,seed,stream\n{},{},{},{}\n",
                a.out.display(),
                a.count,
                a.seed,
                a.stream
            )
        },
        || format!("wrote {} values to {}\n", a.count, a.out.display()),
    );
    Ok(())
}

fn check_support(
    d: &DataFile,
    tag: &str,
    accept: impl Fn(f64) -> bool,
    support: &str,
) -> CliResult<()> {
    match d.find_outside(accept) {
        Some((line, v)) => Err(CliError::Domain(format!(
            "{}:{line}: value {v} is outside the {tag} support {support}",
            d.sample.source
        ))),
        None => Ok(()),
    }
}

fn fit_one(d: &DataFile, m: ModelArg, opts: &FitOptions) -> CliResult<FitResult> {
    let s = &d.sample;
    Ok(match m {
        ModelArg::Ggn => fit_ggn(s, opts)?,
        ModelArg::Gn => fit_gn(s, opts)?,
        ModelArg::Gamma => {
            check_support(d, "gamma", |x| x > 0.0, "(0, inf)")?;
            fit_gamma(s, opts)?
        }
        ModelArg::Beta => {
            check_support(d, "beta", |x| x > 0.0 && x < 1.0, "(0, 1)")?;
            fit_beta(s, opts)?
        }
        ModelArg::ShiftedGamma => fit_gamma_shifted(s, opts)?,
        ModelArg::RescaledBeta => fit_beta_rescaled(s, opts)?,
        ModelArg::All => unreachable!("expanded before fitting"),
    })
}

fn fit_table(fits: &[FitResult]) -> String {
    let mut t = String::new();
    for f in fits {
        writeln!(
            t,
            "{}  n={}  loglik={}  converged={}  iterations={}",
            tag_name(f.model_tag),
            f.n_obs,
            num(f.loglik),
            f.converged,
            f.iterations
        )
        .unwrap();
        if let Some(tr) = f.transform {
            let sign = if tr.shift < 0.0 { '+' } else { '-' };
            writeln!(
                t,
                "  data mapped by (x {sign} {}) / {}",
                num(tr.shift.abs()),
                num(tr.scale)
            )
            .unwrap();
        }
        for (k, name) in f.model_tag.parameter_names().iter().enumerate() {
            let se = f.std_errors.as_ref().map_or("NA".into(), |s| num(s[k]));
            writeln!(t, "  {name:<6} {:>16} ({se})", num(f.estimates[k])).unwrap();
        }
    }
    t
}

fn fit_csv(fits: &[FitResult]) -> String {
    let mut t = String::from("model,parameter,estimate,std_error,loglik,converged\n");
    for f in fits {
        for (k, name) in f.model_tag.parameter_names().iter().enumerate() {
            let se = f.std_errors.as_ref().map_or(f64::NAN, |s| s[k]);
            writeln!(
                t,
                "{},{name},{:?},{:?},{:?},{}",
                tag_name(f.model_tag),
                f.estimates[k],
                se,
                f.loglik,
                f.converged
            )
            .unwrap();
        }
    }
    t
}

const GOF_HEADER: [&str; 11] = [
    "model", "k", "loglik", "d_KL", "d_chi2", "d_KS", "W*", "A*", "AIC", "AICc", "BIC",
];

fn gof_cells(model: &str, loglik: f64, r: &GofReport) -> Vec<String> {
    vec![
        model.to_string(),
        r.k_params.to_string(),
        num(loglik),
        num(r.d_kl),
        num(r.d_chi2),
        num(r.d_ks),
        num(r.w_star),
        num(r.a_star),
        num(r.aic),
        r.aicc.map_or("NA".into(), num),
        num(r.bic),
    ]
}

fn align(rows: &[Vec<String>]) -> String {
    let widths: Vec<usize> = (0..rows[0].len())
        .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
        .collect();
    let mut t = String::new();
    for r in rows {
        let cells: Vec<String> = r
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:>w$}"))
            .collect();
        writeln!(t, "{}", cells.join("  ").trim_end()).unwrap();
    }
    t
}

fn fit(a: &FitArgs, format: Format, argv: &[String]) -> CliResult<()> {
    let d = read_data(&a.data)?;
    let mut models: Vec<ModelArg> = Vec::new();
    for &m in &a.model {
        let expand = match m {
            ModelArg::All => vec![
                ModelArg::Ggn,
                ModelArg::ShiftedGamma,
                ModelArg::RescaledBeta,
            ],
            m => vec![m],
        };
        for m in expand {
            if !models.contains(&m) {
                models.push(m);
            }
        }
    }
    let opts = FitOptions::default();
    let fits = models
        .iter()
        .map(|&m| fit_one(&d, m, &opts))
        .collect::<CliResult<Vec<_>>>()?;
    let comparison = if a.gof {
        let mut rows = fits
            .iter()
            .map(|f| {
                Ok(Comparison {
                    model_tag: f.model_tag,
                    gof: gof_report_for_fit(&d.sample, f, a.bins)?,
                })
            })
            .collect::<CliResult<Vec<_>>>()?;
        rows.sort_by(|x, y| x.gof.aic.total_cmp(&y.gof.aic));
        Some(rows)
    } else {
        None
    };
    let env = Envelope::new(
        argv,
        None,
        digest(&[("data", &d.bytes)]),
        FitPayload { fits, comparison },
    );
    write_report(a.report.as_deref(), &env)?;
    let fits = &env.payload.fits;
    let loglik_of = |t: ModelTag| {
        fits.iter()
            .find(|f| f.model_tag == t)
            .map_or(f64::NAN, |f| f.loglik)
    };
    let gof_rows = |c: &[Comparison]| -> Vec<Vec<String>> {
        let mut rows = vec![GOF_HEADER.iter().map(|s| s.to_string()).collect()];
        rows.extend(
            c.iter()
                .map(|r| gof_cells(tag_name(r.model_tag), loglik_of(r.model_tag), &r.gof)),
        );
        rows
    };
    emit(
        format,
        || env.to_json(),
        || {
            let mut t = fit_csv(fits);
            if let Some(c) = &env.payload.comparison {
                t.push('\n');
                for r in gof_rows(c) {
                    writeln!(t, "{}", r.join(",")).unwrap();
                }
            }
            t
        },
        || {
            let mut t = fit_table(fits);
            if let Some(c) = &env.payload.comparison {
                t.push('\n');
                t.push_str(&align(&gof_rows(c)));
            }
            t
        },
    );
    let stuck: Vec<&str> = fits
        .iter()
        .filter(|f| !f.converged)
        .map(|f| tag_name(f.model_tag))
        .collect();
    if stuck.is_empty() {
        Ok(())
    } else {
        Err(CliError::Convergence(format!(
            "fit did not converge: {}",
            stuck.join(", ")
        )))
    }
}

fn gof(a: &GofArgs, format: Format, argv: &[String]) -> CliResult<()> {
    let d = read_data(&a.data)?;
    let (payload, digest_value, loglik) = match &a.fit_report {
        Some(path) => {
            let (fit, bytes) = load_fit(path, a.model.map(tag_of))?;
            let report = gof_report_for_fit(&d.sample, &fit, a.bins)?;
            let dg = digest(&[("data", &d.bytes), ("fit_report", &bytes)]);
            (
                GofPayload {
                    model: tag_name(fit.model_tag).into(),
                    report,
                },
                dg,
                fit.loglik,
            )
        }
        None => {
            let report = gof_report_empirical(&d.sample, a.bins)?;
            let dg = digest(&[("data", &d.bytes)]);
            (
                GofPayload {
                    model: "ECDF".into(),
                    report,
                },
                dg,
                f64::NAN,
            )
        }
    };
    let env = Envelope::new(argv, None, digest_value, payload);
    write_report(a.report.as_deref(), &env)?;
    let rows = vec![
        GOF_HEADER.iter().map(|s| s.to_string()).collect(),
        gof_cells(&env.payload.model, loglik, &env.payload.report),
    ];
    emit(
        format,
        || env.to_json(),
        || rows.iter().map(|r| r.join(",") + "\n").collect(),
        || {
            let r = &env.payload.report;
            let mut t = align(&rows);
            writeln!(
                t,
                "bins={} ({:?}), excluded empty bins={}, clamped AD terms={}, {}",
                r.binning.bins, r.binning.rule, r.excluded_bins, r.clamped, r.edf_modification
            )
            .unwrap();
            t
        },
    );
    Ok(())
}

#[derive(Deserialize)]
#[serde(untagged)]
enum StudyFile {
    Many { scenarios: Vec<StudyConfig> },
    One(StudyConfig),
}

#[derive(Debug, Serialize, Deserialize)]
struct StudyPayload {
    scenarios: Vec<StudyConfig>,
    result: StudyResult,
}

const STUDY_HEADER: &str =
    "scenario,N,mean_mu,mse_mu,mean_sigma,mse_sigma,mean_s,mse_s,mean_a,mse_a,failures,replications_used";

fn study_csv(cells: &[StudyCell]) -> String {
    let mut t = format!("{STUDY_HEADER}\n");
    for c in cells {
        write!(t, "{},{}", c.scenario_label, c.n).unwrap();
        for k in 0..4 {
            write!(t, ",{:?},{:?}", c.mean[k], c.mse[k]).unwrap();
        }
        writeln!(t, ",{},{}", c.failures, c.replications_used).unwrap();
    }
    t
}

fn study_table(cells: &[StudyCell]) -> String {
    let mut rows = vec![["scenario", "N", "mu", "sigma", "s", "a", "failures"]
        .map(String::from)
        .to_vec()];
    for c in cells {
        let mut r = vec![c.scenario_label.clone(), c.n.to_string()];
        r.extend((0..4).map(|k| format!("{:.3} ({:.3})", c.mean[k], c.mse[k])));
        r.push(c.failures.to_string());
        rows.push(r);
    }
    align(&rows)
}

fn study(a: &StudyArgs, format: Format, argv: &[String]) -> CliResult<()> {
    let bytes = read_bytes(&a.config)?;
    let file: StudyFile = serde_json::from_slice(&bytes).map_err(|e| CliError::Json {
        path: a.config.clone(),
        msg: e.to_string(),
    })?;
    let mut scenarios = match file {
        StudyFile::Many { scenarios } => scenarios,
        StudyFile::One(c) => vec![c],
    };
    if scenarios.is_empty() {
        return Err(CliError::Domain(format!(
            "{}: no scenarios",
            a.config.display()
        )));
    }
    for c in &mut scenarios {
        if let Some(m) = a.replications {
            c.replications = m;
        }
        if let Some(s) = a.seed {
            c.base_seed = s;
        }
    }
    let result = run_studies(&scenarios, &FitOptions::default())?;
    let env = Envelope::new(
        argv,
        None,
        digest(&[("config", &bytes)]),
        StudyPayload { scenarios, result },
    );
    write_report(a.report.as_deref(), &env)?;
    let cells = &env.payload.result.cells;
    if let Some(p) = &a.csv {
        write_text(p, &study_csv(cells))?;
    }
    emit(
        format,
        || env.to_json(),
        || study_csv(cells),
        || study_table(cells),
    );
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct PlotPayload {
    model: String,
    x: Vec<f64>,
    empirical_density: Vec<f64>,
    fitted_density: Vec<f64>,
}

fn plotdata(a: &PlotArgs, format: Format, argv: &[String]) -> CliResult<()> {
    if a.points < 2 {
        return Err(CliError::Domain("--points must be at least 2".into()));
    }
    if !(a.lower > 0.0 && a.lower < a.upper && a.upper < 1.0) {
        return Err(CliError::Domain(format!(
            "need 0 < lower < upper < 1, got {} and {}",
            a.lower, a.upper
        )));
    }
    let d = read_data(&a.data)?;
    let (fit, bytes) = load_fit(&a.fit_report, a.model.map(tag_of))?;
    let hist = empirical_density(&d.sample, a.bins)?;
    let (lo, hi) = (fit.quantile(a.lower)?, fit.quantile(a.upper)?);
    let step = (hi - lo) / (a.points - 1) as f64;
    let x: Vec<f64> = (0..a.points)
        .map(|i| {
            if i + 1 == a.points {
                hi
            } else {
                lo + step * i as f64
            }
        })
        .collect();
    let payload = PlotPayload {
        model: tag_name(fit.model_tag).into(),
        empirical_density: x.iter().map(|&v| hist.at(v)).collect(),
        fitted_density: x.iter().map(|&v| fit.pdf(v)).collect(),
        x,
    };
    let env = Envelope::new(
        argv,
        None,
        digest(&[("data", &d.bytes), ("fit_report", &bytes)]),
        payload,
    );
    let csv = || {
        let p = &env.payload;
        let mut t = String::from("x,empirical_density,fitted_density\n");
        for i in 0..p.x.len() {
            writeln!(
                t,
                "{:?},{:?},{:?}",
                p.x[i], p.empirical_density[i], p.fitted_density[i]
            )
            .unwrap();
        }
        t
    };
    match &a.out {
        Some(path) => {
            write_text(path, &csv())?;
            emit(
                format,
                || env.to_json(),
                || format!("path,points\n{},{}\n", path.display(), a.points),
                || format!("wrote {} grid points to {}\n", a.points, path.display()),
            );
        }
        None => emit(format, || env.to_json(), csv, csv),
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct MomentRow {
    order: usize,
    series: f64,
    terms: usize,
    converged: bool,
    quadrature: f64,
    relative_difference: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct MomentPayload {
    params: GgnParams,
    config: SeriesConfig,
    moments: Vec<MomentRow>,
}

fn moments(a: &MomentArgs, format: Format, argv: &[String]) -> CliResult<()> {
    let p = params(&a.params)?;
    if a.order == 0 {
        return Err(CliError::Domain("--order must be at least 1".into()));
    }
    let cfg = SeriesConfig::new(a.tolerance, a.max_terms)?;
    let mut rows = Vec::new();
    for n in 1..=a.order {
        let s = ggn_moment(n, &p, &cfg)?;
        let q = ggn_moment_quadrature(n, &p)?;
        rows.push(MomentRow {
            order: n,
            series: s.value,
            terms: s.terms,
            converged: s.converged,
            quadrature: q,
            relative_difference: (s.value - q).abs() / q.abs(),
        });
    }
    let param_json = serde_json::to_vec(&(p, cfg)).expect("parameters serialize");
    let env = Envelope::new(
        argv,
        None,
        digest(&[("params", &param_json)]),
        MomentPayload {
            params: p,
            config: cfg,
            moments: rows,
        },
    );
    let rows = &env.payload.moments;
    emit(
        format,
        || env.to_json(),
        || {
            let mut t =
                String::from("order,series,terms,converged,quadrature,relative_difference\n");
            for r in rows {
                writeln!(
                    t,
                    "{},{:?},{},{},{:?},{:?}",
                    r.order, r.series, r.terms, r.converged, r.quadrature, r.relative_difference
                )
                .unwrap();
            }
            t
        },
        || {
            let mut table = vec![[
                "order",
                "series",
                "terms",
                "converged",
                "quadrature",
                "rel. diff",
            ]
            .map(String::from)
            .to_vec()];
            for r in rows {
                table.push(vec![
                    r.order.to_string(),
                    num(r.series),
                    r.terms.to_string(),
                    r.converged.to_string(),
                    num(r.quadrature),
                    format!("{:.2e}", r.relative_difference),
                ]);
            }
            align(&table)
        },
    );
    let short: Vec<String> = rows
        .iter()
        .filter(|r| !r.converged)
        .map(|r| r.order.to_string())
        .collect();
    if short.is_empty() {
        Ok(())
    } else {
        Err(CliError::Convergence(format!(
            "series hit the {}-term cap for order {}; raise --max-terms",
            a.max_terms,
            short.join(", ")
        )))
    }
}
