//! Monte Carlo parameter study: generate, fit and aggregate over
//! replications for each sample size of a scenario.
//!
//! Replication `r` of every sample size draws from stream `r` of the
//! scenario's base seed, so results depend only on the configuration.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::estimation::{fit_ggn, FitOptions, MIN_FIT_SIZE};
use crate::ggn::GgnParams;
use crate::sampling::{ggn_sample, StreamSpec};

/// Where each replication's optimizer starts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StartRule {
    /// At the generating parameters.
    #[default]
    Truth,
    /// From the data-driven start grid, as for an ordinary fit.
    Data,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub scenario_label: String,
    pub true_params: GgnParams,
    pub sample_sizes: Vec<usize>,
    pub replications: usize,
    pub base_seed: u64,
    #[serde(default)]
    pub start: StartRule,
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        self.true_params.validate()?;
        if self.sample_sizes.is_empty() {
            return Err(domain(format!(
                "scenario {}: no sample sizes",
                self.scenario_label
            )));
        }
        if let Some(n) = self.sample_sizes.iter().find(|&&n| n < MIN_FIT_SIZE) {
            return Err(domain(format!(
                "scenario {}: sample size {n} is below {MIN_FIT_SIZE}",
                self.scenario_label
            )));
        }
        if self.replications == 0 {
            return Err(domain(format!(
                "scenario {}: zero replications",
                self.scenario_label
            )));
        }
        Ok(())
    }
}

/// Aggregates for one scenario and sample size, parameters ordered
/// `(μ, σ, s, a)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyCell {
    pub scenario_label: String,
    pub true_params: GgnParams,
    pub n: usize,
    pub mean: [f64; 4],
    pub mse: [f64; 4],
    /// Replications whose fit errored or did not converge.
    pub failures: usize,
    pub replications_used: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub cells: Vec<StudyCell>,
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
struct Sum {
    sum: f64,
    comp: f64,
}

impl Sum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

fn run_cell(cfg: &StudyConfig, n: usize, opts: &FitOptions) -> StudyCell {
    let truth = cfg.true_params.to_array();
    let mut sums = [Sum::default(); 4];
    let mut sq = [Sum::default(); 4];
    let mut failures = 0;
    for r in 0..cfg.replications {
        let stream = StreamSpec::new(cfg.base_seed, r as u64);
        let fit = ggn_sample(&cfg.true_params, n, &stream).and_then(|d| fit_ggn(&d, opts));
        match fit {
            Ok(f) if f.converged => {
                for k in 0..4 {
                    sums[k].add(f.estimates[k]);
                    sq[k].add((f.estimates[k] - truth[k]).powi(2));
                }
            }
            _ => failures += 1,
        }
    }
    let used = cfg.replications - failures;
    let m = used as f64;
    StudyCell {
        scenario_label: cfg.scenario_label.clone(),
        true_params: cfg.true_params,
        n,
        mean: std::array::from_fn(|k| sums[k].value() / m),
        mse: std::array::from_fn(|k| sq[k].value() / m),
        failures,
        replications_used: used,
    }
}

/// Runs every sample size of one scenario.
pub fn run_study(cfg: &StudyConfig) -> Result<StudyResult> {
    run_study_with(cfg, &FitOptions::default())
}

/// As [`run_study`] with explicit fit options; `initial` is overridden when
/// the scenario starts at the truth.
pub fn run_study_with(cfg: &StudyConfig, opts: &FitOptions) -> Result<StudyResult> {
    cfg.validate()?;
    let opts = FitOptions {
        initial: match cfg.start {
            StartRule::Truth => Some(cfg.true_params),
            StartRule::Data => opts.initial,
        },
        ..*opts
    };
    Ok(StudyResult {
        cells: cfg
            .sample_sizes
            .iter()
            .map(|&n| run_cell(cfg, n, &opts))
            .collect(),
    })
}

/// Runs several scenarios in order and concatenates their cells.
pub fn run_studies(cfgs: &[StudyConfig], opts: &FitOptions) -> Result<StudyResult> {
    for c in cfgs {
        c.validate()?;
    }
    let mut cells = Vec::new();
    for c in cfgs {
        cells.extend(run_study_with(c, opts)?.cells);
    }
    Ok(StudyResult { cells })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(m: usize, sizes: Vec<usize>) -> StudyConfig {
        StudyConfig {
            scenario_label: "a2-s1".into(),
            true_params: GgnParams::new(0.0, 1.0, 1.0, 2.0).unwrap(),
            sample_sizes: sizes,
            replications: m,
            base_seed: 2024,
            start: StartRule::Truth,
        }
    }

    #[test]
    fn smoke_run_reports_two_replications() {
        let r = run_study(&config(2, vec![25])).unwrap();
        assert_eq!(r.cells.len(), 1);
        let c = &r.cells[0];
        assert_eq!(c.replications_used + c.failures, 2);
        assert!(c.mse.iter().all(|v| *v >= 0.0 || v.is_nan()));
    }

    #[test]
    fn same_seed_same_result() {
        let cfg = config(3, vec![25, 49]);
        assert_eq!(run_study(&cfg).unwrap(), run_study(&cfg).unwrap());
    }

    #[test]
    fn validation() {
        assert!(config(0, vec![25]).validate().is_err());
        assert!(config(2, vec![]).validate().is_err());
        assert!(config(2, vec![3]).validate().is_err());
    }

    #[test]
    fn compensated_sum() {
        let mut s = Sum::default();
        for x in [1e16, 1.0, -1e16, 1.0] {
            s.add(x);
        }
        assert_eq!(s.value(), 2.0);
    }

    #[test]
    fn config_round_trips_through_json() {
        let cfg = config(5, vec![25, 121]);
        let text = serde_json::to_string(&cfg).unwrap();
        let back: StudyConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }
}
