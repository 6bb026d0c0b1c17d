//! One experiment: instance → descent run → certificate → majorant → checks.

use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use klcert::convex::{
    alternating_potential, ConvexObjective, FeasibilityPotential, ScaledSquaredDistance,
};
use klcert::descent::{
    alternating_projection, barycentric_projection, gradient_method, ista, proximal_point,
    DescentParams, DescentRun, Method, StepSchedule,
};
use klcert::desingularization::{
    from_error_bound, to_error_bound, Desingularizer, DesingularizerDoc, ErrorBoundCertificate,
    Profile, Region,
};
use klcert::error_bounds::{
    feasibility_bound, hoffman_constant, lasso_gamma, uniformly_convex_profile, FeasibilityVariant,
    HoffmanMode,
};
use klcert::linalg::distance;
use klcert::majorant::{worst_case_sequence, MajorantSequence, ProxMethod};
use klcert::sampling::RegionSampler;
use klcert::verification::{
    check_distance_bound, check_error_bound_sampling, check_h1_h2, check_kl_sampling,
    check_majorization, check_step_ratio, default_gap_floor, CertificationReport, CheckEntry,
    CheckStatus, SolutionSet, ALGEBRAIC_TOL,
};
use klcert::Extended;
use serde::{Deserialize, Serialize};

use crate::config::{CertificateSource, ExperimentConfig, InstanceSource, MethodKind, NuSource};
use crate::instances::{generate, Instance, LassoData};
use crate::io::{fmt_f64, write_atomic};
use crate::matrix_io::{read_matrix, read_vector};

/// Relative tolerance of the majorization check, scaled by `f(x₀) − min f`.
pub const MAJORIZATION_REL_TOL: f64 = 1e-9;
pub const MAJORIZATION_ABS_TOL: f64 = 1e-12;

/// Everything an experiment computes before grading.
pub struct Prepared {
    pub instance: Instance,
    pub objective: ConvexObjective<f64>,
    pub run: DescentRun<f64>,
    pub desingularizer: Desingularizer<f64>,
    pub error_bound: ErrorBoundCertificate<f64>,
    pub solutions: SolutionSet<f64>,
    /// Known minimizer, if any; otherwise the run's limit is used.
    pub xstar: Option<Vec<f64>>,
    pub majorant: MajorantSequence<f64>,
    /// `γ_R`, `M`, `M′` or `σ` before scaling; `None` for supplied certificates.
    pub base_constant: Option<f64>,
    pub certificate_id: String,
    pub notes: Vec<String>,
}

/// The certificate as stored next to a trace, enough to re-grade it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateFile {
    pub id: String,
    pub method: Method,
    pub a: f64,
    pub b: f64,
    pub min_value: f64,
    pub xstar: Option<Vec<f64>>,
    pub desingularizer: DesingularizerDoc,
}

pub struct Outcome {
    pub prepared: Prepared,
    pub report: CertificationReport,
}

impl Outcome {
    pub fn ok(&self) -> bool {
        self.report.ok()
    }
}

pub fn resolve_instance(src: &InstanceSource, exact_nu: bool) -> Result<Instance> {
    match src {
        InstanceSource::Generate(spec) => generate(spec, exact_nu),
        InstanceSource::File { path } => Instance::load(path),
        InstanceSource::Matrices { a, y, mu, x0 } => {
            let a = read_matrix(a)?;
            let y = read_vector(y)?;
            let x0 = match x0 {
                Some(p) => read_vector(p)?,
                None => vec![0.0; a.cols()],
            };
            Ok(Instance::Lasso(LassoData::from_parts(a, y, *mu, x0)?))
        }
    }
}

fn method_for(instance: &Instance, kind: Option<MethodKind>) -> Result<MethodKind> {
    let kind = kind.unwrap_or(match instance {
        Instance::Lasso(_) => MethodKind::Ista,
        Instance::Feasibility(_) => MethodKind::Barycentric,
        Instance::UniformlyConvex(_) => MethodKind::Gradient,
    });
    let ok = matches!(
        (instance, kind),
        (Instance::Lasso(_), MethodKind::Ista)
            | (
                Instance::Feasibility(_),
                MethodKind::Barycentric | MethodKind::Alternating
            )
            | (
                Instance::UniformlyConvex(_),
                MethodKind::Gradient | MethodKind::ProximalPoint
            )
    );
    if !ok {
        bail!(
            "method {kind:?} does not apply to a {} instance",
            instance.family()
        );
    }
    Ok(kind)
}

fn schedule(cfg: &ExperimentConfig, lipschitz: f64) -> Result<StepSchedule<f64>> {
    Ok(match cfg.method.step {
        Some(l) => StepSchedule::Constant(l),
        None => StepSchedule::relative(cfg.method.d.unwrap_or(0.5), lipschitz)?,
    })
}

/// Power error bound `f − min f ≥ γ dist²` and its desingularizer.
fn quadratic_certificate(
    gamma: f64,
    region: Region,
    id: &str,
) -> Result<(ErrorBoundCertificate<f64>, Desingularizer<f64>)> {
    let cert = ErrorBoundCertificate::power(gamma, 2.0, Extended::PosInfinity, region, id)?;
    let d = from_error_bound(&cert)?;
    Ok((cert, d))
}

/// Alternating-projection potentials are finite on `C₁` only, so their
/// samples are projected onto `C₁`.
fn sampler_for(region: &Region, p: &Prepared, seed: u64) -> Result<RegionSampler> {
    let x0 = p.instance.x0();
    let half_width = 2.0 * (x0.iter().fold(0.0_f64, |m, v| m.max(v.abs())) + 1.0);
    let s = RegionSampler::for_region(region, p.instance.dim(), half_width, seed)?;
    Ok(match (&p.instance, p.run.method) {
        (Instance::Feasibility(data), Method::Alternating) => {
            s.with_domain(data.set_objects()?[0].clone())
        }
        _ => s,
    })
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    cfg.validate()?;
    let exact_nu = matches!(
        cfg.certificate,
        CertificateSource::Computed {
            nu: NuSource::Exact,
            ..
        }
    );
    let instance = resolve_instance(&cfg.instance, exact_nu)?;
    let kind = method_for(&instance, cfg.method.kind)?;
    let scale = match cfg.certificate {
        CertificateSource::Computed { scale, .. } => scale,
        _ => 1.0,
    };
    let mut notes = Vec::new();
    let (objective, run, computed, solutions, xstar, base_constant) = match &instance {
        Instance::Lasso(data) => {
            let inst = data.build()?;
            let obj = ConvexObjective::new(Arc::new(inst.objective()?), data.min_value);
            let run = ista(
                &inst,
                data.min_value,
                &schedule(cfg, inst.lipschitz())?,
                cfg.steps,
            )?;
            let computed = match cfg.certificate {
                CertificateSource::Computed { nu, .. } => {
                    let nu = match nu {
                        NuSource::Exact => {
                            hoffman_constant(&inst.hoffman_system()?, HoffmanMode::exact())?.nu
                        }
                        NuSource::Sampled { samples } => {
                            notes.push(
                                "nu is a sampled lower bound; the certificate is not guaranteed"
                                    .into(),
                            );
                            hoffman_constant(
                                &inst.hoffman_system()?,
                                HoffmanMode::Sampled {
                                    samples,
                                    seed: cfg.seed,
                                },
                            )?
                            .nu
                        }
                        NuSource::Value { nu } => nu,
                    };
                    let c = lasso_gamma(&inst, nu)?;
                    let region = Region::L1Ball { radius: c.radius };
                    let id = format!(
                        "lasso gamma_R={} nu={} R={} scale={scale}",
                        fmt_f64(c.gamma_r),
                        fmt_f64(nu),
                        fmt_f64(c.radius)
                    );
                    Some((
                        quadratic_certificate(2.0 * c.gamma_r * scale, region, &id)?,
                        c.gamma_r,
                        id,
                    ))
                }
                _ => None,
            };
            let base = computed.as_ref().map(|c| c.1);
            (
                obj,
                run,
                computed,
                SolutionSet::Point(data.minimizer.clone()),
                Some(data.minimizer.clone()),
                base,
            )
        }
        Instance::Feasibility(data) => {
            let inst = data.build()?;
            let sets = data.set_objects()?;
            let (variant, run, obj) = match kind {
                MethodKind::Barycentric => {
                    let f = FeasibilityPotential {
                        sets: sets.clone(),
                        weights: data.weights.clone(),
                    };
                    let run = barycentric_projection(&inst, &data.x0, cfg.steps)?;
                    (
                        FeasibilityVariant::Barycentric,
                        run,
                        ConvexObjective::new(Arc::new(f), 0.0),
                    )
                }
                _ => {
                    if sets.len() != 2 {
                        bail!("alternating projections need exactly 2 sets");
                    }
                    let f = alternating_potential(sets[0].clone(), sets[1].clone())?;
                    let run = alternating_projection(&inst, &data.x0, cfg.steps)?;
                    (
                        FeasibilityVariant::Alternating,
                        run,
                        ConvexObjective::new(Arc::new(f), 0.0),
                    )
                }
            };
            let fb = feasibility_bound(&inst, &data.x0, variant)?;
            let id = format!(
                "{variant:?} constant={} rho={} scale={scale}",
                fmt_f64(fb.constant),
                fmt_f64(fb.rho)
            );
            let region = fb.certificate.region.clone();
            let computed = Some((
                quadratic_certificate(2.0 * fb.constant * scale, region, &id)?,
                fb.constant,
                id,
            ));
            (
                obj,
                run,
                computed,
                SolutionSet::Intersection(sets),
                None,
                Some(fb.constant),
            )
        }
        Instance::UniformlyConvex(data) => {
            let f = Arc::new(ScaledSquaredDistance {
                center: data.center.clone(),
                sigma: data.sigma,
            });
            let obj = ConvexObjective::new(f.clone(), 0.0);
            let run = match kind {
                MethodKind::Gradient => gradient_method(
                    f,
                    0.0,
                    &data.x0,
                    &schedule(cfg, 2.0 * data.sigma)?,
                    cfg.steps,
                )?,
                _ => {
                    let lam = StepSchedule::Constant(cfg.method.step.unwrap_or(1.0));
                    proximal_point(f, 0.0, &data.x0, &lam, cfg.steps)?
                }
            };
            let id = format!(
                "uniformly convex sigma={} p=2 scale={scale}",
                fmt_f64(data.sigma)
            );
            let sigma = data.sigma * scale;
            // f − min f ≥ σ dist², and the uniformly convex profile coincides
            // with the converted error bound for p = 2
            let cert = ErrorBoundCertificate::power(
                sigma,
                2.0,
                Extended::PosInfinity,
                Region::Everywhere,
                &id,
            )?;
            let d = uniformly_convex_profile(sigma, 2.0, 1.0)?;
            (
                obj,
                run,
                Some(((cert, d), data.sigma, id)),
                SolutionSet::Point(data.center.clone()),
                Some(data.center.clone()),
                Some(data.sigma),
            )
        }
    };
    let (error_bound, desingularizer, certificate_id) = match (&cfg.certificate, computed) {
        (CertificateSource::Computed { .. }, Some(((cert, d), _, id))) => (cert, d, id),
        (CertificateSource::Supplied { desingularizer }, _) => {
            let d = Desingularizer::from_doc(desingularizer)?;
            (to_error_bound(&d), d, "supplied".to_string())
        }
        (CertificateSource::Rate { q }, _) => {
            let DescentParams { a, b } = run.params;
            let ell = (q - 1.0) * b * b / (2.0 * a);
            let region = match &instance {
                Instance::Lasso(_) => Region::L1Ball {
                    radius: data_radius(&instance)?,
                },
                _ => Region::Everywhere,
            };
            let d = Desingularizer::new(
                Profile::QuadraticInverse { ell },
                Extended::PosInfinity,
                region,
            )?;
            (to_error_bound(&d), d, format!("rate q={}", fmt_f64(*q)))
        }
        (CertificateSource::Computed { .. }, None) => {
            unreachable!("computed certificates exist for every family")
        }
    };
    let majorant = worst_case_sequence(
        &desingularizer,
        run.gaps[0].max(0.0),
        run.params,
        cfg.steps,
        ProxMethod::Auto,
    )
    .context("building the worst-case sequence")?;
    Ok(Prepared {
        instance,
        objective,
        run,
        desingularizer,
        error_bound,
        solutions,
        xstar,
        majorant,
        base_constant,
        certificate_id,
        notes,
    })
}

fn data_radius(instance: &Instance) -> Result<f64> {
    match instance {
        Instance::Lasso(d) => Ok(d.build()?.radius()),
        _ => bail!("not a lasso instance"),
    }
}

/// `dist(x_k, C₂) ≤ dist(x₀, C₂)/q^{k/2}` from the quadratic majorant.
fn check_c2_rate(run: &DescentRun<f64>, maj: &MajorantSequence<f64>) -> Option<CheckEntry> {
    let dists = run.dist_to_c2.as_ref()?;
    let cf = maj.closed_form?;
    let d0 = dists[0];
    let tol = ALGEBRAIC_TOL * (1.0 + d0);
    let worst = dists
        .iter()
        .enumerate()
        .map(|(k, &d)| d - d0 / cf.q.powf(k as f64 / 2.0))
        .fold(f64::NEG_INFINITY, f64::max);
    Some(CheckEntry {
        name: "c2_distance_rate".into(),
        worst_violation: Some(worst),
        samples: dists.len(),
        tolerance: tol,
        status: if worst <= tol {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        },
        pass: worst <= tol,
        diagnostic: format!("q = {}", cf.q),
    })
}

/// Trace-only checks, used by both `run` and `certify`.
pub fn trace_checks(
    run: &DescentRun<f64>,
    maj: &MajorantSequence<f64>,
    d: &Desingularizer<f64>,
    xstar: Option<&[f64]>,
    min_value: f64,
) -> Vec<CheckEntry> {
    let mut out: Vec<CheckEntry> = check_h1_h2(run, ALGEBRAIC_TOL).into();
    out.push(check_majorization(
        run,
        maj,
        d,
        MAJORIZATION_ABS_TOL,
        MAJORIZATION_REL_TOL,
    ));
    out.push(check_distance_bound(run, maj, d, xstar));
    out.push(check_step_ratio(
        run,
        d,
        maj.zeta,
        default_gap_floor(min_value),
    ));
    out.extend(check_c2_rate(run, maj));
    out
}

pub fn grade(p: &Prepared, cfg: &ExperimentConfig) -> Result<CertificationReport> {
    let mut report = CertificationReport::new(cfg.name.clone(), p.certificate_id.clone());
    for c in trace_checks(
        &p.run,
        &p.majorant,
        &p.desingularizer,
        p.xstar.as_deref(),
        p.objective.min_value(),
    ) {
        report.push(c);
    }
    let mut s = sampler_for(p.desingularizer.region(), p, cfg.seed)?;
    report.push(check_kl_sampling(
        &p.desingularizer,
        &p.objective,
        &mut s,
        cfg.samples,
    )?);
    let mut s = sampler_for(&p.error_bound.region, p, cfg.seed.wrapping_add(1))?;
    report.push(check_error_bound_sampling(
        &p.error_bound,
        &p.objective,
        &p.solutions,
        &mut s,
        cfg.samples,
    )?);
    Ok(report)
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Outcome> {
    let prepared = prepare(cfg)?;
    let report = grade(&prepared, cfg)?;
    Ok(Outcome { prepared, report })
}

impl Prepared {
    /// `x*` for distances: the known minimizer, or the run's limit when the
    /// run converged.
    pub fn distance_reference(&self) -> Option<Vec<f64>> {
        self.xstar.clone().or_else(|| {
            (self.run.stationary || self.run.final_step() < klcert::verification::CONVERGED_STEP)
                .then(|| self.run.last().to_vec())
        })
    }

    pub fn certificate_file(&self) -> Result<CertificateFile> {
        Ok(CertificateFile {
            id: self.certificate_id.clone(),
            method: self.run.method,
            a: self.run.params.a,
            b: self.run.params.b,
            min_value: self.objective.min_value(),
            xstar: self.distance_reference(),
            desingularizer: self.desingularizer.to_doc()?,
        })
    }

    /// CSV trace: one row per iterate.
    pub fn trace_csv(&self) -> Result<String> {
        let n = self.instance.dim();
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<String> = [
            "k",
            "value_gap",
            "value_bound",
            "step_norm",
            "distance_to_xstar",
            "distance_bound",
            "witness_norm",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        header.extend((1..=n).map(|i| format!("x{i}")));
        w.write_record(&header)?;
        let xs = self.distance_reference();
        let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
        for k in 0..self.run.iterates.len() {
            let x = &self.run.iterates[k];
            let mut row = vec![
                k.to_string(),
                fmt_f64(self.run.gaps[k]),
                opt(self.majorant.value_bound(k)),
                fmt_f64(self.run.step_norms[k]),
                opt(xs.as_ref().map(|s| distance(x, s))),
                opt(self.majorant.distance_bound(k)),
                opt(self.run.witness_norms[k]),
            ];
            row.extend(x.iter().map(|&v| fmt_f64(v)));
            w.write_record(&row)?;
        }
        Ok(String::from_utf8(w.into_inner()?)?)
    }
}

/// Writes `config.json`, `instance.json`, `certificate.json`, `trace.csv`
/// and `report.json` into `dir`.
pub fn write_outputs(outcome: &Outcome, cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    let p = &outcome.prepared;
    write_atomic(&dir.join("config.json"), cfg.to_json().as_bytes())?;
    write_atomic(&dir.join("instance.json"), p.instance.to_json().as_bytes())?;
    let cert = serde_json::to_string_pretty(&p.certificate_file()?)?;
    write_atomic(&dir.join("certificate.json"), cert.as_bytes())?;
    write_atomic(&dir.join("trace.csv"), p.trace_csv()?.as_bytes())?;
    write_atomic(
        &dir.join("report.json"),
        outcome.report.to_json()?.as_bytes(),
    )?;
    Ok(())
}

/// Re-grades a stored trace against a stored certificate.
pub fn certify_trace(
    trace_csv: &str,
    cert: &CertificateFile,
    run_id: &str,
) -> Result<CertificationReport> {
    let mut rdr = csv::Reader::from_reader(trace_csv.as_bytes());
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .with_context(|| format!("trace lacks column {name}"))
    };
    let (gap_c, step_c, wit_c) = (col("value_gap")?, col("step_norm")?, col("witness_norm")?);
    let x_cols: Vec<usize> = (0..headers.len())
        .filter(|&i| {
            headers[i]
                .strip_prefix('x')
                .is_some_and(|r| r.parse::<usize>().is_ok())
        })
        .collect();
    let params = DescentParams::new(cert.a, cert.b)?;
    let mut run: Option<DescentRun<f64>> = None;
    for rec in rdr.records() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64> {
            rec[i]
                .parse::<f64>()
                .with_context(|| format!("bad number {:?}", &rec[i]))
        };
        let gap = num(gap_c)?;
        let x: Vec<f64> = x_cols.iter().map(|&i| num(i)).collect::<Result<_>>()?;
        let witness = if rec[wit_c].is_empty() {
            None
        } else {
            Some(num(wit_c)?)
        };
        let step = num(step_c)?;
        match run.as_mut() {
            None => {
                run = Some(DescentRun {
                    method: cert.method,
                    params,
                    iterates: vec![x],
                    values: vec![gap + cert.min_value],
                    gaps: vec![gap],
                    step_norms: vec![step],
                    witness_norms: vec![witness],
                    steps: Vec::new(),
                    l1_norms: None,
                    fejer_distances: None,
                    dist_to_c2: None,
                    stationary: false,
                    notes: Vec::new(),
                });
            }
            Some(r) => {
                r.iterates.push(x);
                r.values.push(gap + cert.min_value);
                r.gaps.push(gap);
                r.step_norms.push(step);
                r.witness_norms.push(witness);
            }
        }
    }
    let run = run.context("empty trace")?;
    let d = Desingularizer::from_doc(&cert.desingularizer)?;
    let maj = worst_case_sequence(
        &d,
        run.gaps[0].max(0.0),
        params,
        run.len(),
        ProxMethod::Auto,
    )?;
    let mut report = CertificationReport::new(run_id, cert.id.clone());
    for c in trace_checks(&run, &maj, &d, cert.xstar.as_deref(), cert.min_value) {
        report.push(c);
    }
    Ok(report)
}
