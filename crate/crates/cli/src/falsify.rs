//! Corrupts computed certificates and records which checks notice.

use anyhow::Result;
use rayon::prelude::*;

use klcert::verification::CheckStatus;

use crate::config::{CertificateSource, ExperimentConfig};
use crate::experiment::run_experiment;

#[derive(Debug, Clone, PartialEq)]
pub struct Flip {
    pub config: String,
    pub check: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Falsification {
    pub factor: f64,
    /// Checks that pass with the computed constant and fail with the
    /// corrupted one.
    pub flips: Vec<Flip>,
    /// Configurations whose uncorrupted certificate already fails somewhere.
    pub baseline_failures: Vec<String>,
    pub configs: usize,
}

fn scaled(cfg: &ExperimentConfig, factor: f64) -> Option<ExperimentConfig> {
    let CertificateSource::Computed { nu, scale } = cfg.certificate else {
        return None;
    };
    let mut out = cfg.clone();
    out.certificate = CertificateSource::Computed {
        nu,
        scale: scale * factor,
    };
    Some(out)
}

/// Runs each configuration with its computed constant and with the constant
/// multiplied by `factor`.
pub fn falsify(configs: &[ExperimentConfig], factor: f64) -> Result<Falsification> {
    let results: Vec<Option<Result<(Vec<Flip>, bool)>>> = configs
        .par_iter()
        .map(|cfg| {
            let bad = scaled(cfg, factor)?;
            Some(grade_pair(cfg, &bad))
        })
        .collect();
    let mut out = Falsification {
        factor,
        flips: Vec::new(),
        baseline_failures: Vec::new(),
        configs: 0,
    };
    for (cfg, r) in configs.iter().zip(results) {
        let Some(r) = r else { continue };
        let (flips, failed) = r?;
        out.flips.extend(flips);
        if failed {
            out.baseline_failures.push(cfg.name.clone());
        }
        out.configs += 1;
    }
    Ok(out)
}

fn grade_pair(cfg: &ExperimentConfig, bad: &ExperimentConfig) -> Result<(Vec<Flip>, bool)> {
    let base = run_experiment(cfg)?.report;
    let corrupted = run_experiment(bad)?.report;
    let flips = base
        .checks
        .iter()
        .zip(&corrupted.checks)
        .filter(|(b, c)| b.status == CheckStatus::Pass && c.status == CheckStatus::Fail)
        .map(|(b, _)| Flip {
            config: cfg.name.clone(),
            check: b.name.clone(),
        })
        .collect();
    Ok((flips, !base.ok()))
}

/// Smallest factor in `{2, 4, 8, …, 2^max_doublings}` at which some check on
/// `cfg` flips to failure.
pub fn flip_factor(cfg: &ExperimentConfig, max_doublings: u32) -> Result<Option<f64>> {
    for k in 1..=max_doublings {
        let f = 2f64.powi(k as i32);
        if !falsify(std::slice::from_ref(cfg), f)?.flips.is_empty() {
            return Ok(Some(f));
        }
    }
    Ok(None)
}
