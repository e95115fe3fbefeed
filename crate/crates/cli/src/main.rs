//! `ggn`: sample, fit, compare and study the gamma generalized normal
//! distribution from the command line.

mod commands;
mod data;
mod error;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::exit;

const EXIT_HELP: &str = "\
Exit status:
  0  success
  2  usage error
  3  parse error (data file, report or config)
  4  domain error (invalid parameters, unsupported data, validation)
  5  convergence failure (report is still written)
  6  I/O error";

#[derive(Debug, Parser)]
#[command(name = "ggn", version, about = "Gamma generalized normal distribution toolkit", after_help = EXIT_HELP)]
pub struct Cli {
    /// Output format on standard output.
    #[arg(long, global = true, value_enum, default_value_t = Format::Table)]
    pub format: Format,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Table,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a reproducible sample; writes values and a `<out>.json` envelope.
    Sample(SampleArgs),
    /// Maximum likelihood fit of one or more models.
    Fit(FitArgs),
    /// Goodness-of-fit statistics for a fitted model or the empirical self-test.
    Gof(GofArgs),
    /// Monte Carlo parameter study from a JSON config.
    Study(StudyArgs),
    /// Empirical and fitted densities on a grid, as CSV for external plotting.
    Plotdata(PlotArgs),
    /// Raw moments by the series and by quadrature.
    Moments(MomentArgs),
}

#[derive(Debug, Args)]
pub struct ParamArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub mu: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub sigma: f64,
    /// Tail exponent of the generalized normal baseline.
    #[arg(long, allow_hyphen_values = true)]
    pub s: f64,
    /// Gamma shape.
    #[arg(long, allow_hyphen_values = true)]
    pub a: f64,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0)]
    pub stream: u64,
    /// Output file, one value per line.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Ggn,
    Gn,
    Gamma,
    Beta,
    /// Gamma after shifting the data onto the positive axis when needed.
    ShiftedGamma,
    /// Beta after mapping the data into (0, 1) when needed.
    RescaledBeta,
    /// GGN, shifted gamma and rescaled beta.
    All,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Data file: one value per line or a single-column CSV.
    pub data: PathBuf,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "ggn")]
    pub model: Vec<ModelArg>,
    /// Add goodness-of-fit statistics and order the models by AIC.
    #[arg(long)]
    pub gof: bool,
    #[arg(long)]
    pub bins: Option<usize>,
    /// Write the JSON envelope here.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TagArg {
    Ggn,
    Gn,
    Gamma,
    Beta,
}

#[derive(Debug, Args)]
pub struct GofArgs {
    pub data: PathBuf,
    /// Report written by `fit --report`.
    #[arg(long, required_unless_present = "ecdf", conflicts_with = "ecdf")]
    pub fit_report: Option<PathBuf>,
    /// Compare the histogram and ECDF with themselves.
    #[arg(long)]
    pub ecdf: bool,
    /// Which fit to use when the report holds several.
    #[arg(long, value_enum)]
    pub model: Option<TagArg>,
    #[arg(long)]
    pub bins: Option<usize>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StudyArgs {
    /// JSON config: one scenario or `{"scenarios": [...]}`.
    pub config: PathBuf,
    /// Override the replication count of every scenario.
    #[arg(long)]
    pub replications: Option<usize>,
    /// Override the base seed of every scenario.
    #[arg(long)]
    pub seed: Option<u64>,
    /// CSV output, one row per scenario and sample size.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    pub data: PathBuf,
    #[arg(long)]
    pub fit_report: PathBuf,
    #[arg(long, value_enum)]
    pub model: Option<TagArg>,
    #[arg(long, default_value_t = 200)]
    pub points: usize,
    /// Grid starts at this quantile of the fitted model.
    #[arg(long, default_value_t = 0.001)]
    pub lower: f64,
    #[arg(long, default_value_t = 0.999)]
    pub upper: f64,
    #[arg(long)]
    pub bins: Option<usize>,
    /// CSV output file; standard output if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MomentArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    /// Highest order reported; orders 1..=order.
    #[arg(long, default_value_t = 3)]
    pub order: usize,
    #[arg(long, default_value_t = 200)]
    pub max_terms: usize,
    #[arg(long, default_value_t = 1e-10)]
    pub tolerance: f64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let argv: Vec<String> = std::env::args().skip(1).collect();
    match commands::run(&cli, &argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
