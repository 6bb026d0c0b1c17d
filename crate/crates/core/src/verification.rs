//! Cross-checks of descent runs against their certificates.

use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::convex::ConvexObjective;
use crate::descent::DescentRun;
use crate::desingularization::{kl_gap, Desingularizer, ErrorBoundCertificate, KlGap};
use crate::error::{Error, Result};
use crate::extended::Extended;
use crate::linalg::distance;
use crate::majorant::MajorantSequence;
use crate::sampling::RegionSampler;
use crate::scalar::Real;
use crate::sets::{project_intersection, project_intersection_2d, ConvexSet};

/// Tolerance for algebraic identities and exact bounds.
pub const ALGEBRAIC_TOL: f64 = 1e-9;
/// Tolerance for bounds involving a numerically estimated minimizer.
pub const DISTANCE_TOL: f64 = 1e-7;
/// Final step length below which a run counts as converged.
pub const CONVERGED_STEP: f64 = 1e-10;
/// Sampling checks draw at most this many points per requested sample.
pub const MAX_DRAWS_PER_SAMPLE: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    /// Iterates left the certificate's stable set; the check does not apply.
    RegionViolated,
    Skipped,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckEntry {
    pub name: String,
    /// Largest observed `lhs − rhs`; nonpositive means the inequality held
    /// with room to spare. Absent when the check did not run.
    pub worst_violation: Option<f64>,
    pub samples: usize,
    pub tolerance: f64,
    pub status: CheckStatus,
    /// `worst_violation ≤ tolerance`; false for checks that did not run.
    pub pass: bool,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub diagnostic: String,
}

impl CheckEntry {
    fn graded(name: &str, worst: f64, samples: usize, tolerance: f64) -> Self {
        let status = if worst <= tolerance {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        };
        Self {
            name: name.into(),
            worst_violation: Some(worst),
            samples,
            tolerance,
            status,
            pass: status == CheckStatus::Pass,
            diagnostic: String::new(),
        }
    }

    fn marked(
        name: &str,
        status: CheckStatus,
        tolerance: f64,
        diagnostic: impl Into<String>,
    ) -> Self {
        Self {
            name: name.into(),
            worst_violation: None,
            samples: 0,
            tolerance,
            status,
            pass: false,
            diagnostic: diagnostic.into(),
        }
    }

    fn with_diagnostic(mut self, d: impl Into<String>) -> Self {
        self.diagnostic = d.into();
        self
    }

    pub fn passed(&self) -> bool {
        self.pass
    }

    pub fn failed(&self) -> bool {
        self.status == CheckStatus::Fail
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificationReport {
    pub run_id: String,
    pub certificate_id: String,
    pub checks: Vec<CheckEntry>,
}

impl CertificationReport {
    pub fn new(run_id: impl Into<String>, certificate_id: impl Into<String>) -> Self {
        Self {
            run_id: run_id.into(),
            certificate_id: certificate_id.into(),
            checks: Vec::new(),
        }
    }

    pub fn push(&mut self, entry: CheckEntry) {
        self.checks.push(entry);
    }

    /// `true` when no check failed; inconclusive, skipped and region-violated
    /// entries do not count as failures.
    pub fn ok(&self) -> bool {
        !self.checks.iter().any(CheckEntry::failed)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "run {} / certificate {}",
            self.run_id, self.certificate_id
        );
        let _ = writeln!(
            out,
            "{:<28} {:>15} {:>9} {:>9}  status",
            "check", "worst", "samples", "tol"
        );
        for c in &self.checks {
            let _ = writeln!(
                out,
                "{:<28} {:>15} {:>9} {:>9.1e}  {:?}{}",
                c.name,
                c.worst_violation.map_or("-".into(), |w| format!("{w:.6e}")),
                c.samples,
                c.tolerance,
                c.status,
                if c.diagnostic.is_empty() {
                    String::new()
                } else {
                    format!(" ({})", c.diagnostic)
                }
            );
        }
        out
    }
}

/// Per-step (H1) and (H2) with the run's declared constants.
pub fn check_h1_h2<T: Real>(run: &DescentRun<T>, tol: f64) -> [CheckEntry; 2] {
    let n = run.len();
    let worst = |f: &dyn Fn(usize) -> T| {
        (1..=n)
            .map(|k| f(k).to_f64_lossy())
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let h1 = worst(&|k| run.h1_violation(k));
    let h2 = worst(&|k| run.h2_violation(k));
    if n == 0 {
        return [
            CheckEntry::marked(
                "h1_sufficient_decrease",
                CheckStatus::Skipped,
                tol,
                "no steps",
            ),
            CheckEntry::marked("h2_relative_error", CheckStatus::Skipped, tol, "no steps"),
        ];
    }
    [
        CheckEntry::graded("h1_sufficient_decrease", h1, n, tol),
        CheckEntry::graded("h2_relative_error", h2, n, tol),
    ]
}

fn region_exit<T: Real>(run: &DescentRun<T>, d: &Desingularizer<T>) -> Option<usize> {
    run.iterates.iter().position(|x| !d.region().contains(x))
}

/// `f(x_k) − min f ≤ ψ(α_k) + tol` for every `k` covered by the majorant;
/// a stationary run keeps its last gap. `tol = abs + rel·ψ(α₀)`.
pub fn check_majorization<T: Real>(
    run: &DescentRun<T>,
    maj: &MajorantSequence<T>,
    d: &Desingularizer<T>,
    abs_tol: f64,
    rel_tol: f64,
) -> CheckEntry {
    let tol = abs_tol + rel_tol * maj.psi_alpha[0].to_f64_lossy();
    if let Some(k) = region_exit(run, d) {
        return CheckEntry::marked(
            "majorization",
            CheckStatus::RegionViolated,
            tol,
            format!("iterate {k} left {:?}", d.region()),
        );
    }
    let last = *run.gaps.last().expect("nonempty");
    let worst = (0..maj.len())
        .map(|k| (run.gaps.get(k).copied().unwrap_or(last) - maj.psi_alpha[k]).to_f64_lossy())
        .fold(f64::NEG_INFINITY, f64::max);
    CheckEntry::graded("majorization", worst, maj.len(), tol)
}

/// `‖x_k − x*‖ ≤ (b/a)α_k + √(ψ(α_{k−1})/a)` for `k ≥ 1`. Without `x*`
/// the run's last iterate is used if the run converged.
pub fn check_distance_bound<T: Real>(
    run: &DescentRun<T>,
    maj: &MajorantSequence<T>,
    d: &Desingularizer<T>,
    xstar: Option<&[T]>,
) -> CheckEntry {
    let name = "distance_bound";
    if let Some(k) = region_exit(run, d) {
        return CheckEntry::marked(
            name,
            CheckStatus::RegionViolated,
            DISTANCE_TOL,
            format!("iterate {k} left the region"),
        );
    }
    let limit;
    let xs = match xstar {
        Some(x) => x,
        None => {
            let step = run.final_step().to_f64_lossy();
            if !(run.stationary || step < CONVERGED_STEP) {
                return CheckEntry::marked(
                    name,
                    CheckStatus::Skipped,
                    DISTANCE_TOL,
                    format!("run not converged (last step {step:e})"),
                );
            }
            limit = run.last().to_vec();
            &limit
        }
    };
    let last = run.last();
    let mut worst = f64::NEG_INFINITY;
    let mut count = 0;
    for k in 1..maj.len() {
        let x = run.iterates.get(k).map_or(last, |v| v.as_slice());
        let bound = maj.distance_bound(k).expect("k in range");
        worst = worst.max((distance(x, xs) - bound).to_f64_lossy());
        count += 1;
    }
    if count == 0 {
        return CheckEntry::marked(
            name,
            CheckStatus::Skipped,
            DISTANCE_TOL,
            "majorant has no steps",
        );
    }
    CheckEntry::graded(name, worst, count, DISTANCE_TOL)
}

/// The proof quantity `s_k = (β_{k−1} − β_k)/ψ′(β_k)` with `β_k = φ(r_k)`
/// must satisfy `s_k ≥ ζ`. Steps whose gap is below `floor` are skipped,
/// since rounding dominates `r_k` there.
pub fn check_step_ratio<T: Real>(
    run: &DescentRun<T>,
    d: &Desingularizer<T>,
    zeta: T,
    floor: T,
) -> CheckEntry {
    let name = "s_k_at_least_zeta";
    let mut worst = f64::NEG_INFINITY;
    let mut count = 0;
    for k in 1..=run.len() {
        let (r_prev, r) = (run.gaps[k - 1], run.gaps[k]);
        if r <= floor || r_prev <= floor || run.step_norms[k] == T::zero() {
            continue;
        }
        let (b_prev, b) = (d.phi(r_prev), d.phi(r));
        let s = (b_prev - b) / d.dpsi(b);
        worst = worst.max((zeta - s).to_f64_lossy());
        count += 1;
    }
    if count == 0 {
        return CheckEntry::marked(
            name,
            CheckStatus::Skipped,
            ALGEBRAIC_TOL,
            "all gaps below the noise floor",
        );
    }
    CheckEntry::graded(name, worst, count, ALGEBRAIC_TOL)
        .with_diagnostic(format!("noise floor {:e}", floor.to_f64_lossy()))
}

/// Gap floor used by [`check_step_ratio`]: `1e-9·max(1, |min f|)`.
pub fn default_gap_floor<T: Real>(min_value: T) -> T {
    T::lit(1e-9) * T::one().max(min_value.abs())
}

/// `min kl_gap ≥ −1e−9` over `samples` in-region points; draws outside the
/// region, the domain or the value band are discarded.
pub fn check_kl_sampling<T: Real>(
    d: &Desingularizer<T>,
    obj: &ConvexObjective<T>,
    sampler: &mut RegionSampler,
    samples: usize,
) -> Result<CheckEntry> {
    let mut worst = f64::NEG_INFINITY;
    let mut used = 0;
    for _ in 0..samples * MAX_DRAWS_PER_SAMPLE {
        if used == samples {
            break;
        }
        let x: Vec<T> = sampler.sample();
        match kl_gap(d, obj, &x)? {
            KlGap::OutOfDomain => {}
            KlGap::Value(Extended::PosInfinity) => used += 1,
            KlGap::Value(Extended::Finite(g)) => {
                worst = worst.max(-g.to_f64_lossy());
                used += 1;
            }
        }
    }
    if used == 0 {
        return Ok(CheckEntry::marked(
            "kl_sampling",
            CheckStatus::Inconclusive,
            ALGEBRAIC_TOL,
            "no in-region samples",
        ));
    }
    Ok(CheckEntry::graded(
        "kl_sampling",
        worst,
        used,
        ALGEBRAIC_TOL,
    ))
}

/// Solution set with an exactly computable distance.
#[derive(Debug, Clone)]
pub enum SolutionSet<T: Real> {
    Point(Vec<T>),
    Set(Arc<dyn ConvexSet<T>>),
    /// `∩ Cᵢ`; exact in the plane, Dykstra otherwise.
    Intersection(Vec<Arc<dyn ConvexSet<T>>>),
    Unknown,
}

impl<T: Real> SolutionSet<T> {
    pub fn distance(&self, x: &[T]) -> Option<T> {
        match self {
            SolutionSet::Point(p) => Some(distance(x, p)),
            SolutionSet::Set(s) => Some(s.distance(x)),
            SolutionSet::Intersection(sets) => {
                let p = if x.len() == 2 {
                    project_intersection_2d(sets, x)?
                } else {
                    project_intersection(sets, x, T::lit(1e-14), 100_000)
                };
                Some(distance(x, &p))
            }
            SolutionSet::Unknown => None,
        }
    }
}

/// `min ω(f(x) − min f) − dist(x, S) ≥ −1e−9` over `samples` in-region points.
pub fn check_error_bound_sampling<T: Real>(
    cert: &ErrorBoundCertificate<T>,
    obj: &ConvexObjective<T>,
    solutions: &SolutionSet<T>,
    sampler: &mut RegionSampler,
    samples: usize,
) -> Result<CheckEntry> {
    let name = "error_bound_sampling";
    if matches!(solutions, SolutionSet::Unknown) {
        return Ok(CheckEntry::marked(
            name,
            CheckStatus::Inconclusive,
            ALGEBRAIC_TOL,
            "solution set not representable",
        ));
    }
    let mut worst = f64::NEG_INFINITY;
    let mut used = 0;
    for _ in 0..samples * MAX_DRAWS_PER_SAMPLE {
        if used == samples {
            break;
        }
        let x: Vec<T> = sampler.sample();
        if !cert.region.contains(&x) {
            continue;
        }
        let Extended::Finite(s) = obj.gap(&x)? else {
            continue;
        };
        if !cert.in_value_band(s) {
            continue;
        }
        let Some(dist) = solutions.distance(&x) else {
            continue;
        };
        worst = worst.max((dist - cert.omega(s)).to_f64_lossy());
        used += 1;
    }
    if used == 0 {
        return Ok(CheckEntry::marked(
            name,
            CheckStatus::Inconclusive,
            ALGEBRAIC_TOL,
            "no in-region samples",
        ));
    }
    Ok(CheckEntry::graded(name, worst, used, ALGEBRAIC_TOL))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convex::{HalfSquaredDistance, ScaledSquaredDistance};
    use crate::descent::{gradient_method, DescentParams, StepSchedule};
    use crate::desingularization::{from_error_bound, Profile, Region};
    use crate::majorant::{worst_case_sequence, ProxMethod};
    use crate::sets::Ball;

    #[test]
    fn kl_sampling_on_square_is_tight() {
        let f: ConvexObjective<f64> =
            ConvexObjective::normalized(Arc::new(ScaledSquaredDistance {
                center: vec![0.0],
                sigma: 1.0,
            }));
        let d = Desingularizer::<f64>::new(
            Profile::Power {
                scale: 1.0,
                exponent: 2.0,
            },
            Extended::PosInfinity,
            Region::Everywhere,
        )
        .unwrap();
        let mut s = RegionSampler::for_region(&Region::Everywhere, 1, 3.0, 1).unwrap();
        let e = check_kl_sampling(&d, &f, &mut s, 500).unwrap();
        assert!(e.passed());
        assert!(e.worst_violation.unwrap().abs() < 1e-12);
        // halving the scale breaks the inequality, doubling keeps it
        let half = d.scaled(0.5).unwrap();
        assert!(check_kl_sampling(&half, &f, &mut s, 100).unwrap().failed());
        let double = d.scaled(2.0).unwrap();
        let e2 = check_kl_sampling(&double, &f, &mut s, 100).unwrap();
        assert!(e2.passed() && e2.worst_violation.unwrap() <= -0.99);
    }

    #[test]
    fn error_bound_for_squared_distance_to_disk() {
        let disk: Arc<dyn ConvexSet<f64>> = Arc::new(Ball::new(vec![1.0, -1.0], 1.5).unwrap());
        // f = dist²(·, C) = 2·(½dist²)
        let f: ConvexObjective<f64> =
            ConvexObjective::normalized(Arc::new(ScaledDist(HalfSquaredDistance {
                set: disk.clone(),
            })));
        let cert = ErrorBoundCertificate::power(
            1.0,
            2.0,
            Extended::PosInfinity,
            Region::Everywhere,
            "disk",
        )
        .unwrap();
        let mut s = RegionSampler::for_region(&Region::Everywhere, 2, 5.0, 2).unwrap();
        let e =
            check_error_bound_sampling(&cert, &f, &SolutionSet::Set(disk.clone()), &mut s, 2000)
                .unwrap();
        assert!(e.passed(), "{e:?}");
        let weaker =
            ErrorBoundCertificate::power(0.5, 2.0, Extended::PosInfinity, Region::Everywhere, "")
                .unwrap();
        assert!(check_error_bound_sampling(
            &weaker,
            &f,
            &SolutionSet::Set(disk.clone()),
            &mut s,
            500
        )
        .unwrap()
        .passed());
        let broken =
            ErrorBoundCertificate::power(2.0, 2.0, Extended::PosInfinity, Region::Everywhere, "")
                .unwrap();
        assert!(
            check_error_bound_sampling(&broken, &f, &SolutionSet::Set(disk), &mut s, 500)
                .unwrap()
                .failed()
        );
        let unknown =
            check_error_bound_sampling(&cert, &f, &SolutionSet::Unknown, &mut s, 10).unwrap();
        assert_eq!(unknown.status, CheckStatus::Inconclusive);
    }

    struct ScaledDist(HalfSquaredDistance<f64>);
    impl crate::convex::ConvexFunction<f64> for ScaledDist {
        fn dim(&self) -> usize {
            self.0.dim()
        }
        fn value(&self, x: &[f64]) -> Extended<f64> {
            Extended::Finite(2.0 * self.0.value(x).finite().unwrap())
        }
        fn nearest_subgradient(&self, x: &[f64], s: &[f64]) -> Option<Vec<f64>> {
            let g = self.0.gradient(x)?;
            Some(g.iter().zip(s).map(|(a, b)| 2.0 * a + b).collect())
        }
        fn name(&self) -> String {
            "dist^2".into()
        }
    }

    #[test]
    fn majorization_and_distance_on_gradient_run() {
        let h = Arc::new(ScaledSquaredDistance::<f64> {
            center: vec![1.0, 2.0],
            sigma: 0.5,
        });
        let f: ConvexObjective<f64> = ConvexObjective::normalized(h.clone());
        let cert =
            ErrorBoundCertificate::power(0.5, 2.0, Extended::PosInfinity, Region::Everywhere, "")
                .unwrap();
        let d = from_error_bound(&cert).unwrap();
        let run = gradient_method(h, 0.0, &[4.0, -1.0], &StepSchedule::Constant(0.5), 60).unwrap();
        let maj = worst_case_sequence(&d, run.gaps[0], run.params, 60, ProxMethod::Auto).unwrap();
        assert_eq!(run.params, DescentParams { a: 1.5, b: 3.0 });
        let m = check_majorization(&run, &maj, &d, ALGEBRAIC_TOL, 0.0);
        assert!(m.passed());
        assert!((maj.psi_alpha[0] - run.gaps[0]).abs() < 1e-12);
        let dist = check_distance_bound(&run, &maj, &d, Some(&[1.0, 2.0]));
        assert!(dist.passed(), "{dist:?}");
        let sk = check_step_ratio(&run, &d, maj.zeta, default_gap_floor(0.0));
        assert!(sk.passed(), "{sk:?}");
        let [h1, h2] = check_h1_h2(&run, ALGEBRAIC_TOL);
        assert!(h1.passed() && h2.passed());
        assert!(check_kl_sampling(
            &d,
            &f,
            &mut RegionSampler::for_region(&Region::Everywhere, 2, 4.0, 0).unwrap(),
            100
        )
        .unwrap()
        .passed());

        let local = d.clone().with_region(Region::Ball {
            center: vec![1.0, 2.0],
            radius: 1.0,
        });
        assert_eq!(
            check_majorization(&run, &maj, &local, ALGEBRAIC_TOL, 0.0).status,
            CheckStatus::RegionViolated
        );
    }

    #[test]
    fn report_serializes_and_grades() {
        let mut r = CertificationReport::new("run", "cert");
        r.push(CheckEntry::graded("a", -1.0, 3, 1e-9));
        r.push(CheckEntry::marked(
            "b",
            CheckStatus::Inconclusive,
            1e-9,
            "none",
        ));
        assert!(r.ok());
        let back: CertificationReport = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        assert_eq!(back.checks[0], r.checks[0]);
        r.push(CheckEntry::graded("c", 1.0, 1, 1e-9));
        assert!(!r.ok());
        assert!(r.table().contains("Fail"));
    }
}
