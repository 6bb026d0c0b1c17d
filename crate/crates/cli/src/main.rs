use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use klcert_cli::config::{ExperimentConfig, FamilySpec, InstanceSource, SetShapes};
use klcert_cli::experiment::{certify_trace, run_experiment, write_outputs, CertificateFile};
use klcert_cli::instances::generate;
use klcert_cli::io::write_atomic;
use klcert_cli::presets::{preset, tiny_lasso};
use klcert_cli::sweep::{d_grid, ell_grid, sweep, SweepGrid};

#[derive(Parser)]
#[command(
    name = "klcert",
    version,
    about = "Certified complexity bounds for first-order convex methods"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Lasso,
    Feasibility,
    UniformlyConvex,
}

#[derive(Clone, Copy, ValueEnum)]
enum Grid {
    D,
    Ell,
}

#[derive(Subcommand)]
enum Command {
    /// Write a random instance as JSON.
    Generate {
        #[arg(long, value_enum)]
        family: Family,
        #[arg(long, default_value_t = 3)]
        m: usize,
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long, default_value_t = 0.5)]
        mu: f64,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value_t = 2)]
        sets: usize,
        /// Only disks instead of alternating disks and half-spaces.
        #[arg(long)]
        disks: bool,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        /// Allow LASSO sizes past the exact Hoffman cap.
        #[arg(long)]
        sampled_nu: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run experiments and grade them.
    Run {
        #[arg(long, conflicts_with = "preset")]
        config: Option<PathBuf>,
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Sweep the step size or the certified curvature.
    Sweep {
        /// Template configuration; defaults to the tiny-lasso preset.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "d")]
        grid: Grid,
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
        #[arg(long, default_value_t = 1e-6)]
        eps_rel: f64,
        #[arg(long, default_value_t = 4)]
        workers: usize,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Grade an existing trace against a stored certificate.
    Certify {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        certificate: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn apply_overrides(cfg: &mut ExperimentConfig, steps: Option<usize>, seed: Option<u64>) {
    if let Some(k) = steps {
        cfg.steps = k;
    }
    if let Some(s) = seed {
        cfg.seed = s;
        if let InstanceSource::Generate(spec) = &cfg.instance {
            cfg.instance = InstanceSource::Generate(spec.with_seed(s));
        }
    }
}

fn main() -> ExitCode {
    match real_main(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

/// `Ok(false)` when some check failed.
fn real_main(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Generate {
            family,
            m,
            n,
            mu,
            dim,
            sets,
            disks,
            sigma,
            sampled_nu,
            seed,
            out,
        } => {
            let spec = match family {
                Family::Lasso => FamilySpec::Lasso { m, n, mu, seed },
                Family::Feasibility => {
                    let shapes = if disks {
                        SetShapes::Disks
                    } else {
                        SetShapes::Mixed
                    };
                    FamilySpec::Feasibility {
                        dim,
                        sets,
                        shapes,
                        seed,
                    }
                }
                Family::UniformlyConvex => FamilySpec::UniformlyConvex {
                    dim,
                    sigma,
                    p: 2.0,
                    seed,
                },
            };
            generate(&spec, !sampled_nu)?.save(&out)?;
            println!("wrote {}", out.display());
            Ok(true)
        }
        Command::Run {
            config,
            preset: name,
            out,
            steps,
            seed,
        } => {
            let mut cfgs = match (config, name) {
                (Some(path), None) => vec![ExperimentConfig::load(&path)?],
                (None, Some(name)) => preset(&name)?,
                _ => bail!("give exactly one of --config or --preset"),
            };
            let mut ok = true;
            let many = cfgs.len() > 1;
            for cfg in &mut cfgs {
                apply_overrides(cfg, steps, seed);
                let outcome =
                    run_experiment(cfg).with_context(|| format!("experiment {}", cfg.name))?;
                print!("{}", outcome.report.table());
                for n in outcome
                    .prepared
                    .run
                    .notes
                    .iter()
                    .chain(&outcome.prepared.notes)
                {
                    println!("note: {n}");
                }
                if let Some(dir) = &out {
                    let dir = if many {
                        dir.join(&cfg.name)
                    } else {
                        dir.clone()
                    };
                    write_outputs(&outcome, cfg, &dir)?;
                }
                ok &= outcome.ok();
            }
            Ok(ok)
        }
        Command::Sweep {
            config,
            grid,
            values,
            eps_rel,
            workers,
            steps,
            seed,
            out,
        } => {
            let mut template = match config {
                Some(path) => ExperimentConfig::load(&path)?,
                None => tiny_lasso(),
            };
            apply_overrides(&mut template, steps, seed);
            let grid = match grid {
                Grid::D => SweepGrid::D(values.unwrap_or_else(d_grid)),
                Grid::Ell => SweepGrid::Ell(values.unwrap_or_else(ell_grid)),
            };
            let table = sweep(&template, &grid, eps_rel, workers)?;
            let csv = table.to_csv()?;
            print!("{csv}");
            if let Some(argmax) = table.argmax_q() {
                println!("argmax q: {} = {argmax}", table.parameter);
            }
            let ok = table
                .rows
                .iter()
                .all(|r| r.empirical_steps.is_some_and(|e| e <= r.steps_to_epsilon));
            if let Some(dir) = out {
                write_atomic(&dir.join("sweep.csv"), csv.as_bytes())?;
            }
            Ok(ok)
        }
        Command::Certify {
            trace,
            certificate,
            out,
        } => {
            let csv = std::fs::read_to_string(&trace)
                .with_context(|| format!("reading {}", trace.display()))?;
            let text = std::fs::read_to_string(&certificate)
                .with_context(|| format!("reading {}", certificate.display()))?;
            let cert: CertificateFile =
                serde_json::from_str(&text).context("parsing certificate")?;
            let report = certify_trace(&csv, &cert, &trace.display().to_string())?;
            print!("{}", report.table());
            if let Some(path) = out {
                write_atomic(&path, report.to_json()?.as_bytes())?;
            }
            Ok(report.ok())
        }
    }
}
