//! Descent methods satisfying the sufficient-decrease condition (H1)
//! `f(x_k) + a‖x_k − x_{k−1}‖² ≤ f(x_{k−1})` and the relative-error condition
//! (H2) `‖ω_k‖ ≤ b‖x_k − x_{k−1}‖` for some `ω_k ∈ ∂f(x_k)`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::convex::{alternating_potential, Composite, ConvexFunction, FeasibilityPotential, Zero};
use crate::error::{check_dim, usage, Error, Result};
use crate::error_bounds::{FeasibilityInstance, LassoInstance};
use crate::extended::Extended;
use crate::linalg::{all_finite, axpy, distance, norm, norm1, sub};
use crate::scalar::Real;

/// Constants `(a, b)` of (H1) and (H2).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescentParams<T> {
    pub a: T,
    pub b: T,
}

impl<T: Real> DescentParams<T> {
    pub fn new(a: T, b: T) -> Result<Self> {
        let p = Self { a, b };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.a > T::zero() && self.b > T::zero() && self.a.is_finite() && self.b.is_finite() {
            Ok(())
        } else {
            usage(format!(
                "descent constants must be finite and positive (a = {}, b = {})",
                self.a, self.b
            ))
        }
    }

    /// `a = 1/λ⁺ − L/2`, `b = 1/λ⁻ + L`.
    pub fn forward_backward(lambda_min: T, lambda_max: T, lipschitz: T) -> Result<Self> {
        if !(lambda_min > T::zero()) || lambda_min > lambda_max {
            return usage("step bounds need 0 < lambda_min <= lambda_max");
        }
        if lipschitz > T::zero() && lambda_max >= T::two() / lipschitz {
            return usage(format!(
                "lambda_max = {lambda_max} must be below 2/L = {}",
                T::two() / lipschitz
            ));
        }
        Self::new(
            lambda_max.recip() - lipschitz / T::two(),
            lambda_min.recip() + lipschitz,
        )
    }
}

/// Step sizes `λ_k`.
#[derive(Debug, Clone, PartialEq)]
pub enum StepSchedule<T> {
    Constant(T),
    /// `λ_k` for `k = 0, 1, …`; the last entry repeats.
    Sequence(Vec<T>),
}

impl<T: Real> StepSchedule<T> {
    /// `λ = d/L`, default `d = 1/2`.
    pub fn relative(d: T, lipschitz: T) -> Result<Self> {
        if !(lipschitz > T::zero()) || !(d > T::zero()) {
            return usage("relative step needs d > 0 and L > 0");
        }
        Ok(StepSchedule::Constant(d / lipschitz))
    }

    pub fn default_for(lipschitz: T) -> Result<Self> {
        Self::relative(T::half(), lipschitz)
    }

    pub fn step(&self, k: usize) -> T {
        match self {
            StepSchedule::Constant(l) => *l,
            StepSchedule::Sequence(v) => v[k.min(v.len() - 1)],
        }
    }

    /// `(λ⁻, λ⁺)` over the first `steps` steps.
    pub fn bounds(&self, steps: usize) -> Result<(T, T)> {
        match self {
            StepSchedule::Constant(l) => Ok((*l, *l)),
            StepSchedule::Sequence(v) if v.is_empty() => usage("empty step sequence"),
            StepSchedule::Sequence(v) => {
                let used = &v[..steps.clamp(1, v.len())];
                Ok(used
                    .iter()
                    .fold((T::infinity(), T::zero()), |(lo, hi), &l| {
                        (lo.min(l), hi.max(l))
                    }))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ForwardBackward,
    Gradient,
    ProximalPoint,
    Ista,
    Barycentric,
    Alternating,
}

/// Trace of a descent run with its (H1)/(H2) witnesses.
#[derive(Debug, Clone)]
pub struct DescentRun<T> {
    pub method: Method,
    pub params: DescentParams<T>,
    pub iterates: Vec<Vec<T>>,
    /// `f(x_k)`
    pub values: Vec<T>,
    /// `f(x_k) − min f`
    pub gaps: Vec<T>,
    /// `‖x_k − x_{k−1}‖`, with `0` at `k = 0`.
    pub step_norms: Vec<T>,
    /// `‖ω_k‖`; at `k = 0` the least-norm subgradient when available.
    pub witness_norms: Vec<Option<T>>,
    /// `λ_k` used to produce `x_{k+1}`.
    pub steps: Vec<T>,
    pub l1_norms: Option<Vec<T>>,
    /// `‖x_k − x̄‖` for the declared inner-ball centre.
    pub fejer_distances: Option<Vec<T>>,
    /// `dist(x_k, C₂)` for alternating projections.
    pub dist_to_c2: Option<Vec<T>>,
    /// The run stopped on a zero step.
    pub stationary: bool,
    pub notes: Vec<String>,
}

impl<T: Real> DescentRun<T> {
    fn start(
        method: Method,
        params: DescentParams<T>,
        x0: Vec<T>,
        value: T,
        min_value: T,
        w0: Option<T>,
    ) -> Self {
        Self {
            method,
            params,
            iterates: vec![x0],
            values: vec![value],
            gaps: vec![value - min_value],
            step_norms: vec![T::zero()],
            witness_norms: vec![w0],
            steps: Vec::new(),
            l1_norms: None,
            fejer_distances: None,
            dist_to_c2: None,
            stationary: false,
            notes: Vec::new(),
        }
    }

    fn push(&mut self, x: Vec<T>, value: T, min_value: T, witness: T, step: T) {
        let dx = distance(&x, self.iterates.last().expect("nonempty"));
        self.iterates.push(x);
        self.values.push(value);
        self.gaps.push(value - min_value);
        self.step_norms.push(dx);
        self.witness_norms.push(Some(witness));
        self.steps.push(step);
    }

    /// Number of steps taken.
    pub fn len(&self) -> usize {
        self.iterates.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn last(&self) -> &[T] {
        self.iterates.last().expect("nonempty")
    }

    /// `f(x_k) + a‖Δ_k‖² − f(x_{k−1})` for `k ≥ 1`.
    pub fn h1_violation(&self, k: usize) -> T {
        let s = self.step_norms[k];
        self.values[k] + self.params.a * s * s - self.values[k - 1]
    }

    /// `‖ω_k‖ − b‖Δ_k‖` for `k ≥ 1`.
    pub fn h2_violation(&self, k: usize) -> T {
        self.witness_norms[k].expect("witness recorded for k >= 1")
            - self.params.b * self.step_norms[k]
    }

    /// `‖x_K − x_{K−1}‖`, or `0` for a stationary or empty run.
    pub fn final_step(&self) -> T {
        if self.stationary {
            T::zero()
        } else {
            *self.step_norms.last().expect("nonempty")
        }
    }
}

fn value_of<T: Real>(f: &dyn ConvexFunction<T>, x: &[T]) -> Result<T> {
    match f.value(x) {
        Extended::Finite(v) if v.is_finite() => Ok(v),
        _ => Err(Error::NonFinite(format!(
            "objective value at iterate {x:?}"
        ))),
    }
}

fn check_start<T: Real>(dim: usize, x0: &[T]) -> Result<()> {
    check_dim(dim, x0.len())?;
    if !all_finite(x0) {
        return Err(Error::NonFinite("starting point".into()));
    }
    Ok(())
}

/// `x_{k+1} = prox_{λ_k g}(x_k − λ_k∇h(x_k))` on `f = g + h`.
///
/// The witness `ω_{k+1} = ∇h(x_{k+1}) − ∇h(x_k) − (x_{k+1} − x_k)/λ_k` is an
/// element of `∂f(x_{k+1})` by the prox optimality condition.
pub fn forward_backward<T: Real>(
    obj: &Composite<T>,
    min_value: T,
    x0: &[T],
    schedule: &StepSchedule<T>,
    steps: usize,
) -> Result<DescentRun<T>> {
    fb_run(obj, min_value, x0, schedule, steps, Method::ForwardBackward)
}

fn fb_run<T: Real>(
    obj: &Composite<T>,
    min_value: T,
    x0: &[T],
    schedule: &StepSchedule<T>,
    steps: usize,
    method: Method,
) -> Result<DescentRun<T>> {
    check_start(obj.dim(), x0)?;
    if steps == 0 {
        return usage("need at least one step");
    }
    let (lmin, lmax) = schedule.bounds(steps)?;
    let params = DescentParams::forward_backward(lmin, lmax, obj.lipschitz())?;
    let f0 = value_of(obj, x0)?;
    let zero = vec![T::zero(); x0.len()];
    let w0 = obj.nearest_subgradient(x0, &zero).map(|v| norm(&v));
    let mut run = DescentRun::start(method, params, x0.to_vec(), f0, min_value, w0);
    let mut x = x0.to_vec();
    let mut grad = obj.smooth_gradient(&x);
    for k in 0..steps {
        let lam = schedule.step(k);
        let next = obj.prox_nonsmooth(&axpy(&x, -lam, &grad), lam);
        if !all_finite(&next) {
            return Err(Error::NonFinite(format!("iterate {}", k + 1)));
        }
        if next == x {
            run.stationary = true;
            run.notes
                .push(format!("zero step at k = {}; stationary", k + 1));
            break;
        }
        let next_grad = obj.smooth_gradient(&next);
        let dx = sub(&next, &x);
        let witness: Vec<T> = sub(&next_grad, &grad)
            .iter()
            .zip(&dx)
            .map(|(&g, &d)| g - d / lam)
            .collect();
        let v = value_of(obj, &next)?;
        run.push(next.clone(), v, min_value, norm(&witness), lam);
        x = next;
        grad = next_grad;
    }
    Ok(run)
}

/// Explicit gradient method, forward-backward with `g = 0`.
pub fn gradient_method<T: Real>(
    smooth: Arc<dyn ConvexFunction<T>>,
    min_value: T,
    x0: &[T],
    schedule: &StepSchedule<T>,
    steps: usize,
) -> Result<DescentRun<T>> {
    let n = smooth.dim();
    let obj = Composite::new(smooth, Arc::new(Zero { dim: n }))?;
    fb_run(&obj, min_value, x0, schedule, steps, Method::Gradient)
}

/// Proximal point algorithm, forward-backward with `h = 0`.
pub fn proximal_point<T: Real>(
    g: Arc<dyn ConvexFunction<T>>,
    min_value: T,
    x0: &[T],
    schedule: &StepSchedule<T>,
    steps: usize,
) -> Result<DescentRun<T>> {
    let n = g.dim();
    let obj = Composite::with_lipschitz(Arc::new(Zero { dim: n }), g, T::zero())?;
    fb_run(&obj, min_value, x0, schedule, steps, Method::ProximalPoint)
}

/// ISTA on `½‖Ax − y‖² + μ‖x‖₁`; records `‖x_k‖₁`, bounded by `R`.
pub fn ista<T: Real>(
    inst: &LassoInstance<T>,
    min_value: T,
    schedule: &StepSchedule<T>,
    steps: usize,
) -> Result<DescentRun<T>> {
    let obj = inst.objective()?;
    let mut run = fb_run(&obj, min_value, &inst.x0, schedule, steps, Method::Ista)?;
    let l1: Vec<T> = run.iterates.iter().map(|x| norm1(x)).collect();
    let r = inst.radius();
    if let Some(k) = l1.iter().position(|&v| v > r * (T::one() + T::lit(1e-12))) {
        run.notes
            .push(format!("l1 norm {} exceeds R = {r} at k = {k}", l1[k]));
    }
    run.l1_norms = Some(l1);
    Ok(run)
}

/// `x_{k+1} = Σ αᵢ P_{Cᵢ}(x_k)`, the gradient method with unit step on
/// `½ Σ αᵢ dist²(·, Cᵢ)`; `a = ½`, `b = 2`.
pub fn barycentric_projection<T: Real>(
    inst: &FeasibilityInstance<T>,
    x0: &[T],
    steps: usize,
) -> Result<DescentRun<T>> {
    check_start(inst.dim(), x0)?;
    let f = FeasibilityPotential {
        sets: inst.sets.clone(),
        weights: inst.weights.clone(),
    };
    let params = DescentParams::new(T::half(), T::two())?;
    let grad = |x: &[T]| f.gradient(x).expect("smooth potential");
    let mut run = DescentRun::start(
        Method::Barycentric,
        params,
        x0.to_vec(),
        value_of(&f, x0)?,
        T::zero(),
        Some(norm(&grad(x0))),
    );
    let mut fejer = vec![distance(x0, &inst.xbar)];
    let mut x = x0.to_vec();
    for k in 0..steps {
        let next = f.barycenter_of_projections(&x);
        if next == x {
            run.stationary = true;
            run.notes
                .push(format!("zero step at k = {}; stationary", k + 1));
            break;
        }
        let w = norm(&grad(&next));
        run.push(next.clone(), value_of(&f, &next)?, T::zero(), w, T::one());
        fejer.push(distance(&next, &inst.xbar));
        x = next;
    }
    run.fejer_distances = Some(fejer);
    Ok(run)
}

/// `x_{k+1} = P_{C₁}P_{C₂}(x_k)`, forward-backward with unit step on
/// `i_{C₁} + ½ dist²(·, C₂)`; `a = ½`, `b = 2`. A start outside `C₁` is
/// projected onto `C₁` first.
pub fn alternating_projection<T: Real>(
    inst: &FeasibilityInstance<T>,
    x0: &[T],
    steps: usize,
) -> Result<DescentRun<T>> {
    check_start(inst.dim(), x0)?;
    if inst.sets.len() != 2 {
        return usage(format!(
            "alternating projections need m = 2 sets (got {})",
            inst.sets.len()
        ));
    }
    let (c1, c2) = (inst.sets[0].clone(), inst.sets[1].clone());
    let g = alternating_potential(c1.clone(), c2.clone())?;
    let mut notes = Vec::new();
    let start = if c1.contains(x0, T::lit(1e-12) * (T::one() + norm(x0))) {
        x0.to_vec()
    } else {
        notes.push("x0 not in C1; projected onto C1 before iterating".to_string());
        c1.project(x0)
    };
    let params = DescentParams::new(T::half(), T::two())?;
    let zero = vec![T::zero(); start.len()];
    let w0 = g.nearest_subgradient(&start, &zero).map(|v| norm(&v));
    let mut run = DescentRun::start(
        Method::Alternating,
        params,
        start.clone(),
        value_of(&g, &start)?,
        T::zero(),
        w0,
    );
    run.notes = notes;
    let mut fejer = vec![distance(&start, &inst.xbar)];
    let mut dists = vec![c2.distance(&start)];
    let mut x = start;
    let mut p2 = c2.project(&x);
    for k in 0..steps {
        let next = c1.project(&p2);
        if next == x {
            run.stationary = true;
            run.notes
                .push(format!("zero step at k = {}; stationary", k + 1));
            break;
        }
        let p2_next = c2.project(&next);
        // ω = P₂x_k − P₂x_{k+1} ∈ N_{C₁}(x_{k+1}) + ∇h(x_{k+1})
        let w = distance(&p2, &p2_next);
        run.push(next.clone(), value_of(&g, &next)?, T::zero(), w, T::one());
        fejer.push(distance(&next, &inst.xbar));
        dists.push(distance(&next, &p2_next));
        x = next;
        p2 = p2_next;
    }
    run.fejer_distances = Some(fejer);
    run.dist_to_c2 = Some(dists);
    Ok(run)
}

/// Gradient-of-previous-iterate witness bound: `‖∇f(x_k)‖ ≤ (b + L)‖Δ_k‖`.
/// Returns the worst `‖∇f(x_k)‖ − (b + L)‖Δ_k‖`.
pub fn gradient_witness_slack<T: Real>(
    run: &DescentRun<T>,
    smooth: &dyn ConvexFunction<T>,
    lipschitz: T,
) -> T {
    let mut worst = T::neg_infinity();
    for k in 1..run.iterates.len() {
        let g = smooth.gradient(&run.iterates[k]).expect("smooth");
        worst = worst.max(norm(&g) - (run.params.b + lipschitz) * run.step_norms[k]);
    }
    worst
}
