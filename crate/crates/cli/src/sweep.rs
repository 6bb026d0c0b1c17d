//! Parameter sweeps over a template configuration.

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;

use klcert::majorant::{quadratic_complexity, steps_to_epsilon};

use crate::config::ExperimentConfig;
use crate::experiment::prepare;
use crate::io::fmt_f64;

/// Default d-grid `{0.1, 0.2, …, 1.9}`.
pub fn d_grid() -> Vec<f64> {
    (1..20).map(|i| i as f64 / 10.0).collect()
}

/// Default ℓ-grid, as fractions of the computed `ℓ`.
pub fn ell_grid() -> Vec<f64> {
    vec![1.0 / 16.0, 0.125, 0.25, 0.5, 1.0]
}

#[derive(Debug, Clone, PartialEq)]
pub enum SweepGrid {
    /// Relative step sizes `d = λL`.
    D(Vec<f64>),
    /// Multiples of the certified `ℓ`; values at most 1 stay valid.
    Ell(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub q: f64,
    pub steps_to_epsilon: u64,
    /// First `k` with `f(x_k) − min f ≤ ε`, if reached.
    pub empirical_steps: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub parameter: &'static str,
    pub eps: f64,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn argmax_q(&self) -> Option<f64> {
        self.rows
            .iter()
            .max_by(|a, b| a.q.partial_cmp(&b.q).expect("finite q"))
            .map(|r| r.value)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([self.parameter, "q", "steps_to_epsilon", "empirical_steps"])?;
        for r in &self.rows {
            w.write_record([
                fmt_f64(r.value),
                fmt_f64(r.q),
                r.steps_to_epsilon.to_string(),
                r.empirical_steps.map(|k| k.to_string()).unwrap_or_default(),
            ])?;
        }
        Ok(String::from_utf8(w.into_inner()?)?)
    }
}

/// Longest run attempted when looking for the empirical step count.
const MAX_EMPIRICAL_STEPS: usize = 200_000;

fn first_below(gaps: &[f64], eps: f64) -> Option<u64> {
    gaps.iter().position(|&g| g <= eps).map(|k| k as u64)
}

/// One row per grid point; `eps = eps_rel·(f(x₀) − min f)`. Grid points run
/// on a pool of `workers` threads.
pub fn sweep(
    template: &ExperimentConfig,
    grid: &SweepGrid,
    eps_rel: f64,
    workers: usize,
) -> Result<SweepTable> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()?;
    match grid {
        SweepGrid::D(ds) => {
            let rows: Vec<Result<SweepRow>> = pool.install(|| {
                ds.par_iter()
                    .map(|&d| {
                        let mut cfg = template.clone();
                        cfg.method.d = Some(d);
                        cfg.method.step = None;
                        d_row(&cfg, d, eps_rel)
                    })
                    .collect()
            });
            let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
            let eps = rows_eps(template, eps_rel)?;
            Ok(SweepTable {
                parameter: "d",
                eps,
                rows,
            })
        }
        SweepGrid::Ell(fractions) => {
            let p = prepare(template)?;
            let f0 = p.run.gaps[0];
            let eps = eps_rel * f0;
            let empirical = first_below(&p.run.gaps, eps);
            let rows = fractions
                .iter()
                .map(|&frac| {
                    let qc = quadratic_complexity(frac * p.majorant.ell, p.run.params, f0)?;
                    Ok(SweepRow {
                        value: frac * p.majorant.ell,
                        q: qc.q,
                        steps_to_epsilon: steps_to_epsilon(qc.q, f0, eps)?,
                        empirical_steps: empirical,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(SweepTable {
                parameter: "ell",
                eps,
                rows,
            })
        }
    }
}

fn rows_eps(template: &ExperimentConfig, eps_rel: f64) -> Result<f64> {
    let mut cfg = template.clone();
    cfg.steps = 1;
    Ok(eps_rel * prepare(&cfg)?.run.gaps[0])
}

fn d_row(cfg: &ExperimentConfig, d: f64, eps_rel: f64) -> Result<SweepRow> {
    let p = prepare(cfg).with_context(|| format!("d = {d}"))?;
    let Some(cf) = p.majorant.closed_form else {
        bail!("the d-sweep needs a quadratic certificate")
    };
    let f0 = p.run.gaps[0];
    let eps = eps_rel * f0;
    let certified = steps_to_epsilon(cf.q, f0, eps)?;
    let mut empirical = first_below(&p.run.gaps, eps);
    if empirical.is_none() && !p.run.stationary {
        let mut longer = cfg.clone();
        longer.steps = (certified as usize).clamp(cfg.steps + 1, MAX_EMPIRICAL_STEPS);
        empirical = first_below(&prepare(&longer)?.run.gaps, eps);
    }
    Ok(SweepRow {
        value: d,
        q: cf.q,
        steps_to_epsilon: certified,
        empirical_steps: empirical,
    })
}
