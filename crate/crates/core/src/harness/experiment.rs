use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;

use crate::error::Result;
use crate::rng::{derive_seed, tag};

use super::config::{ExperimentConfig, Method};
use super::format_sig9;
use super::trial::{run_trial, PrecisionCurve};

pub const CSV_HEADER: &str = "method,round,mean_precision,stderr_precision,mean_lambda";

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSummary {
    /// Averaged curves in config method order.
    pub curves: Vec<PrecisionCurve>,
    pub csv: String,
}

/// Mean and standard error of the mean, column by column.
fn average(method: Method, trials: &[&PrecisionCurve]) -> PrecisionCurve {
    let n = trials.len();
    let rounds = trials[0].precision.len();
    let mut mean = vec![0.0; rounds];
    let mut stderr = vec![0.0; rounds];
    for r in 0..rounds {
        let m = trials.iter().map(|c| c.precision[r]).sum::<f64>() / n as f64;
        mean[r] = m;
        if n > 1 {
            let ss: f64 = trials.iter().map(|c| (c.precision[r] - m).powi(2)).sum();
            stderr[r] = (ss / (n - 1) as f64 / n as f64).sqrt();
        }
    }
    let lambda = trials[0].lambda.as_ref().map(|_| {
        (0..rounds)
            .map(|r| trials.iter().map(|c| c.lambda.as_ref().map_or(0.0, |l| l[r])).sum::<f64>() / n as f64)
            .collect()
    });
    PrecisionCurve { method, precision: mean, stderr, lambda, trials: n }
}

pub fn render_csv(curves: &[PrecisionCurve]) -> String {
    let mut s = String::with_capacity(64 * curves.iter().map(|c| c.precision.len() + 1).sum::<usize>());
    s.push_str(CSV_HEADER);
    s.push('\n');
    for c in curves {
        for (r, (&m, &e)) in c.precision.iter().zip(&c.stderr).enumerate() {
            let lambda = c.lambda.as_ref().map(|l| format_sig9(l[r])).unwrap_or_default();
            s.push_str(&format!("{},{},{},{},{}\n", c.method, r + 1, format_sig9(m), format_sig9(e), lambda));
        }
    }
    s
}

/// Run all trials (in parallel) and average them. Trial `i` uses the seed
/// derived from `(master_seed, i)`, so results do not depend on scheduling.
pub fn simulate(config: &ExperimentConfig) -> Result<ExperimentSummary> {
    config.validate()?;
    let per_trial: Vec<BTreeMap<Method, PrecisionCurve>> = (0..config.trials)
        .into_par_iter()
        .map(|i| run_trial(config, derive_seed(config.master_seed, tag::TRIAL, i as u64)))
        .collect::<Result<_>>()?;
    let curves = config
        .method_list()
        .into_iter()
        .map(|m| {
            let trials: Vec<&PrecisionCurve> = per_trial.iter().map(|t| &t[&m]).collect();
            average(m, &trials)
        })
        .collect::<Vec<_>>();
    let csv = render_csv(&curves);
    Ok(ExperimentSummary { curves, csv })
}

/// [`simulate`], then write the CSV to `config.output_path`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentSummary> {
    let summary = simulate(config)?;
    write_csv(Path::new(&config.output_path), &summary.csv)?;
    Ok(summary)
}

fn write_csv(path: &Path, csv: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, csv)?;
    Ok(())
}
