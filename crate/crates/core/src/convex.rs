//! Convex functions through value, least-norm subgradient and prox oracles.
//!
//! The subdifferential oracle is [`ConvexFunction::nearest_subgradient`]: it
//! returns `u + shift` for the `u ∈ ∂f(x)` that minimizes `‖u + shift‖`. With
//! `shift = 0` this is the least-norm subgradient `∂⁰f(x)`; with
//! `shift = ∇h(x)` it gives `∂⁰(f + h)(x)` for a smooth `h`, which is how
//! composite objectives are handled without any approximation.

use std::fmt;
use std::ops::Deref;
use std::sync::Arc;

use crate::error::{check_dim, usage, Error, Result};
use crate::extended::Extended;
use crate::linalg::{
    add, all_finite, axpy, cholesky_solve, distance, dot, norm, norm1, sub, Matrix,
};
use crate::scalar::Real;
use crate::sets::ConvexSet;

/// A point of `ℝⁿ`, `n ≥ 1`, with finite coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Point<T>(Vec<T>);

impl<T: Real> Point<T> {
    pub fn new(coords: Vec<T>) -> Result<Self> {
        if coords.is_empty() {
            return usage("points need dimension >= 1");
        }
        if !all_finite(&coords) {
            return Err(Error::NonFinite("point coordinate".into()));
        }
        Ok(Self(coords))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![T::zero(); n.max(1)])
    }

    pub fn into_inner(self) -> Vec<T> {
        self.0
    }
}

impl<T> Deref for Point<T> {
    type Target = [T];
    fn deref(&self) -> &[T] {
        &self.0
    }
}

/// Result of the least-norm subgradient oracle.
#[derive(Debug, Clone, PartialEq)]
pub enum Subgradient<T> {
    Vector(Vec<T>),
    /// `x ∉ dom ∂f`; by convention `‖∂⁰f(x)‖ = +∞`.
    OutsideDomain,
}

impl<T: Real> Subgradient<T> {
    pub fn norm(&self) -> Extended<T> {
        match self {
            Subgradient::Vector(v) => Extended::Finite(norm(v)),
            Subgradient::OutsideDomain => Extended::PosInfinity,
        }
    }

    pub fn vector(&self) -> Option<&[T]> {
        match self {
            Subgradient::Vector(v) => Some(v),
            Subgradient::OutsideDomain => None,
        }
    }
}

pub trait ConvexFunction<T: Real>: Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &[T]) -> Extended<T>;

    /// `u + shift` for the `u ∈ ∂f(x)` closest to `-shift`; `None` when
    /// `∂f(x)` is empty.
    fn nearest_subgradient(&self, x: &[T], shift: &[T]) -> Option<Vec<T>>;

    fn gradient(&self, _x: &[T]) -> Option<Vec<T>> {
        None
    }

    /// Lipschitz constant of the gradient, for smooth functions.
    fn gradient_lipschitz(&self) -> Option<T> {
        None
    }

    /// `argmin_z f(z) + ‖z − x‖²/(2 step)` when available in closed form.
    fn prox(&self, _x: &[T], _step: T) -> Option<Vec<T>> {
        None
    }

    fn name(&self) -> String;
}

/// A convex function together with its (stored, not recomputed) minimum value.
#[derive(Clone)]
pub struct ConvexObjective<T: Real> {
    func: Arc<dyn ConvexFunction<T>>,
    min_value: T,
}

impl<T: Real> fmt::Debug for ConvexObjective<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConvexObjective")
            .field("func", &self.func.name())
            .field("dim", &self.func.dim())
            .field("min_value", &self.min_value)
            .finish()
    }
}

impl<T: Real> ConvexObjective<T> {
    pub fn new(func: Arc<dyn ConvexFunction<T>>, min_value: T) -> Self {
        Self { func, min_value }
    }

    /// Objective whose minimum value is zero.
    pub fn normalized(func: Arc<dyn ConvexFunction<T>>) -> Self {
        Self::new(func, T::zero())
    }

    pub fn function(&self) -> &Arc<dyn ConvexFunction<T>> {
        &self.func
    }

    pub fn dim(&self) -> usize {
        self.func.dim()
    }

    pub fn min_value(&self) -> T {
        self.min_value
    }

    pub fn eval(&self, x: &[T]) -> Result<Extended<T>> {
        check_dim(self.dim(), x.len())?;
        Ok(self.func.value(x))
    }

    /// `f(x) − min f`.
    pub fn gap(&self, x: &[T]) -> Result<Extended<T>> {
        Ok(self.eval(x)?.shifted(self.min_value))
    }

    pub fn min_norm_subgradient(&self, x: &[T]) -> Result<Subgradient<T>> {
        check_dim(self.dim(), x.len())?;
        let zero = vec![T::zero(); x.len()];
        Ok(match self.func.nearest_subgradient(x, &zero) {
            Some(v) => Subgradient::Vector(v),
            None => Subgradient::OutsideDomain,
        })
    }

    /// Proximity operator. Smooth functions without a closed form are handled
    /// by gradient descent on the strongly convex prox subproblem.
    pub fn prox(&self, x: &[T], step: T) -> Result<Point<T>> {
        check_dim(self.dim(), x.len())?;
        if !(step > T::zero()) {
            return usage("prox step must be positive");
        }
        if let Some(p) = self.func.prox(x, step) {
            return Point::new(p);
        }
        let Some(l) = self.func.gradient_lipschitz() else {
            return Err(Error::Unsupported(format!(
                "{} has no prox oracle and is not smooth",
                self.func.name()
            )));
        };
        // z ↦ f(z) + ‖z−x‖²/(2 step) is (1/step)-strongly convex and (L + 1/step)-smooth
        let inv = T::one() / step;
        let eta = T::one() / (l + inv);
        let mut z = x.to_vec();
        for _ in 0..200_000 {
            let g = self
                .func
                .gradient(&z)
                .expect("smooth function exposes its gradient");
            let full: Vec<T> = g
                .iter()
                .zip(z.iter().zip(x))
                .map(|(&gi, (&zi, &xi))| gi + inv * (zi - xi))
                .collect();
            let next = axpy(&z, -eta, &full);
            let moved = distance(&next, &z);
            z = next;
            if moved <= T::lit(1e-15) * (T::one() + norm(&z)) {
                break;
            }
        }
        Point::new(z)
    }
}

/// `f ≡ 0`.
#[derive(Debug, Clone)]
pub struct Zero {
    pub dim: usize,
}

impl<T: Real> ConvexFunction<T> for Zero {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, _x: &[T]) -> Extended<T> {
        Extended::Finite(T::zero())
    }
    fn nearest_subgradient(&self, _x: &[T], shift: &[T]) -> Option<Vec<T>> {
        Some(shift.to_vec())
    }
    fn gradient(&self, x: &[T]) -> Option<Vec<T>> {
        Some(vec![T::zero(); x.len()])
    }
    fn gradient_lipschitz(&self) -> Option<T> {
        Some(T::zero())
    }
    fn prox(&self, x: &[T], _step: T) -> Option<Vec<T>> {
        Some(x.to_vec())
    }
    fn name(&self) -> String {
        "zero".into()
    }
}

/// `f(x) = σ‖x − c‖²`; `σ = ½, c = 0` is the canonical `½‖·‖²`.
#[derive(Debug, Clone)]
pub struct ScaledSquaredDistance<T> {
    pub center: Vec<T>,
    pub sigma: T,
}

impl<T: Real> ScaledSquaredDistance<T> {
    pub fn half_squared_norm(n: usize) -> Self {
        Self {
            center: vec![T::zero(); n],
            sigma: T::half(),
        }
    }
}

impl<T: Real> ConvexFunction<T> for ScaledSquaredDistance<T> {
    fn dim(&self) -> usize {
        self.center.len()
    }
    fn value(&self, x: &[T]) -> Extended<T> {
        let d = distance(x, &self.center);
        Extended::Finite(self.sigma * d * d)
    }
    fn nearest_subgradient(&self, x: &[T], shift: &[T]) -> Option<Vec<T>> {
        Some(add(&self.gradient(x)?, shift))
    }
    fn gradient(&self, x: &[T]) -> Option<Vec<T>> {
        let two_s = T::two() * self.sigma;
        Some(
            x.iter()
                .zip(&self.center)
                .map(|(&a, &c)| two_s * (a - c))
                .collect(),
        )
    }
    fn gradient_lipschitz(&self) -> Option<T> {
        Some(T::two() * self.sigma)
    }
    fn prox(&self, x: &[T], step: T) -> Option<Vec<T>> {
        let t = T::two() * step * self.sigma;
        Some(
            x.iter()
                .zip(&self.center)
                .map(|(&a, &c)| (a + t * c) / (T::one() + t))
                .collect(),
        )
    }
    fn name(&self) -> String {
        format!("{}*|x-c|^2", self.sigma)
    }
}

/// Soft thresholding `sign(v)·max(|v| − τ, 0)`.
pub fn soft_threshold<T: Real>(v: T, tau: T) -> T {
    v.signum() * (v.abs() - tau).max(T::zero())
}

/// `f(x) = μ‖x‖₁`.
#[derive(Debug, Clone)]
pub struct L1Norm<T> {
    pub dim: usize,
    pub weight: T,
}

impl<T: Real> ConvexFunction<T> for L1Norm<T> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &[T]) -> Extended<T> {
        Extended::Finite(self.weight * norm1(x))
    }
    fn nearest_subgradient(&self, x: &[T], shift: &[T]) -> Option<Vec<T>> {
        Some(
            x.iter()
                .zip(shift)
                .map(|(&xi, &si)| {
                    if xi != T::zero() {
                        self.weight * xi.signum() + si
                    } else {
                        soft_threshold(si, self.weight)
                    }
                })
                .collect(),
        )
    }
    fn prox(&self, x: &[T], step: T) -> Option<Vec<T>> {
        let tau = step * self.weight;
        Some(x.iter().map(|&v| soft_threshold(v, tau)).collect())
    }
    fn name(&self) -> String {
        format!("{}*|x|_1", self.weight)
    }
}

/// Indicator `i_C` of a closed convex set.
#[derive(Debug, Clone)]
pub struct Indicator<T: Real> {
    pub set: Arc<dyn ConvexSet<T>>,
}

impl<T: Real> Indicator<T> {
    fn tol(x: &[T]) -> T {
        T::lit(1e-12) * (T::one() + norm(x))
    }
}

impl<T: Real> ConvexFunction<T> for Indicator<T> {
    fn dim(&self) -> usize {
        self.set.dim()
    }
    fn value(&self, x: &[T]) -> Extended<T> {
        if self.set.contains(x, Self::tol(x)) {
            Extended::Finite(T::zero())
        } else {
            Extended::PosInfinity
        }
    }
    fn nearest_subgradient(&self, x: &[T], shift: &[T]) -> Option<Vec<T>> {
        if !self.set.contains(x, Self::tol(x)) {
            return None;
        }
        // min over n ∈ N_C(x) of ‖shift + n‖ is attained at −P_T(−shift)
        let neg: Vec<T> = shift.iter().map(|&s| -s).collect();
        Some(
            self.set
                .project_tangent(x, &neg)
                .into_iter()
                .map(|v| -v)
                .collect(),
        )
    }
    fn prox(&self, x: &[T], _step: T) -> Option<Vec<T>> {
        Some(self.set.project(x))
    }
    fn name(&self) -> String {
        format!("indicator({:?})", self.set.spec())
    }
}

/// `h(x) = ½‖Ax − y‖²`.
#[derive(Debug, Clone)]
pub struct LeastSquares<T> {
    pub a: Matrix<T>,
    pub y: Vec<T>,
    lipschitz: T,
}

impl<T: Real> LeastSquares<T> {
    pub fn new(a: Matrix<T>, y: Vec<T>) -> Result<Self> {
        check_dim(a.rows(), y.len())?;
        let n = a.spectral_norm();
        Ok(Self {
            a,
            y,
            lipschitz: n * n,
        })
    }

    pub fn residual(&self, x: &[T]) -> Vec<T> {
        sub(&self.a.mul_vec(x).expect("dimension checked"), &self.y)
    }
}

impl<T: Real> ConvexFunction<T> for LeastSquares<T> {
    fn dim(&self) -> usize {
        self.a.cols()
    }
    fn value(&self, x: &[T]) -> Extended<T> {
        let r = self.residual(x);
        Extended::Finite(T::half() * dot(&r, &r))
    }
    fn nearest_subgradient(&self, x: &[T], shift: &[T]) -> Option<Vec<T>> {
        Some(add(&self.gradient(x)?, shift))
    }
    fn gradient(&self, x: &[T]) -> Option<Vec<T>> {
        self.a.tr_mul_vec(&self.residual(x)).ok()
    }
    fn gradient_lipschitz(&self) -> Option<T> {
        Some(self.lipschitz)
    }
    fn prox(&self, x: &[T], step: T) -> Option<Vec<T>> {
        // (I + λAᵀA) z = x + λAᵀy
        let n = self.a.cols();
        let mut m = self.a.gram();
        for i in 0..n {
            for j in 0..n {
                let v = step * m.get(i, j) + if i == j { T::one() } else { T::zero() };
                m.set(i, j, v);
            }
        }
        let rhs = axpy(x, step, &self.a.tr_mul_vec(&self.y).ok()?);
        cholesky_solve(&m, &rhs).ok()
    }
    fn name(&self) -> String {
        format!("least_squares({}x{})", self.a.rows(), self.a.cols())
    }
}

/// `h(x) = ½ dist²(x, C)`, with `∇h = I − P_C`, Lipschitz constant 1.
#[derive(Debug, Clone)]
pub struct HalfSquaredDistance<T: Real> {
    pub set: Arc<dyn ConvexSet<T>>,
}

impl<T: Real> ConvexFunction<T> for HalfSquaredDistance<T> {
    fn dim(&self) -> usize {
        self.set.dim()
    }
    fn value(&self, x: &[T]) -> Extended<T> {
        let d = self.set.distance(x);
        Extended::Finite(T::half() * d * d)
    }
    fn nearest_subgradient(&self, x: &[T], shift: &[T]) -> Option<Vec<T>> {
        Some(add(&self.gradient(x)?, shift))
    }
    fn gradient(&self, x: &[T]) -> Option<Vec<T>> {
        Some(sub(x, &self.set.project(x)))
    }
    fn gradient_lipschitz(&self) -> Option<T> {
        Some(T::one())
    }
    fn prox(&self, x: &[T], step: T) -> Option<Vec<T>> {
        let p = self.set.project(x);
        let t = step / (T::one() + step);
        Some(x.iter().zip(&p).map(|(&a, &b)| a + t * (b - a)).collect())
    }
    fn name(&self) -> String {
        format!("half_sq_dist({:?})", self.set.spec())
    }
}

/// Barycentric feasibility potential `½ Σ αᵢ dist²(x, Cᵢ)`.
#[derive(Debug, Clone)]
pub struct FeasibilityPotential<T: Real> {
    pub sets: Vec<Arc<dyn ConvexSet<T>>>,
    pub weights: Vec<T>,
}

impl<T: Real> FeasibilityPotential<T> {
    /// `Σ αᵢ P_{Cᵢ}(x)`
    pub fn barycenter_of_projections(&self, x: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); x.len()];
        for (s, &w) in self.sets.iter().zip(&self.weights) {
            out = axpy(&out, w, &s.project(x));
        }
        out
    }
}

impl<T: Real> ConvexFunction<T> for FeasibilityPotential<T> {
    fn dim(&self) -> usize {
        self.sets[0].dim()
    }
    fn value(&self, x: &[T]) -> Extended<T> {
        let v = self
            .sets
            .iter()
            .zip(&self.weights)
            .fold(T::zero(), |acc, (s, &w)| {
                let d = s.distance(x);
                acc + w * d * d
            });
        Extended::Finite(T::half() * v)
    }
    fn nearest_subgradient(&self, x: &[T], shift: &[T]) -> Option<Vec<T>> {
        Some(add(&self.gradient(x)?, shift))
    }
    fn gradient(&self, x: &[T]) -> Option<Vec<T>> {
        Some(sub(x, &self.barycenter_of_projections(x)))
    }
    fn gradient_lipschitz(&self) -> Option<T> {
        Some(T::one())
    }
    fn name(&self) -> String {
        format!("feasibility_potential(m={})", self.sets.len())
    }
}

/// `g + h` with `h` smooth (gradient Lipschitz with constant `L`) and `g`
/// prox-friendly.
#[derive(Clone)]
pub struct Composite<T: Real> {
    smooth: Arc<dyn ConvexFunction<T>>,
    nonsmooth: Arc<dyn ConvexFunction<T>>,
    lipschitz: T,
}

impl<T: Real> fmt::Debug for Composite<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "Composite({} + {}, L={})",
            self.smooth.name(),
            self.nonsmooth.name(),
            self.lipschitz
        )
    }
}

impl<T: Real> Composite<T> {
    /// Uses the smooth part's own Lipschitz constant.
    pub fn new(
        smooth: Arc<dyn ConvexFunction<T>>,
        nonsmooth: Arc<dyn ConvexFunction<T>>,
    ) -> Result<Self> {
        let l = smooth
            .gradient_lipschitz()
            .ok_or_else(|| Error::Usage(format!("{} is not smooth", smooth.name())))?;
        Self::with_lipschitz(smooth, nonsmooth, l)
    }

    pub fn with_lipschitz(
        smooth: Arc<dyn ConvexFunction<T>>,
        nonsmooth: Arc<dyn ConvexFunction<T>>,
        lipschitz: T,
    ) -> Result<Self> {
        check_dim(smooth.dim(), nonsmooth.dim())?;
        if !(lipschitz >= T::zero()) || !lipschitz.is_finite() {
            return usage("Lipschitz constant must be finite and nonnegative");
        }
        let probe = vec![T::zero(); smooth.dim()];
        if smooth.gradient(&probe).is_none() {
            return usage(format!("{} has no gradient oracle", smooth.name()));
        }
        if nonsmooth.prox(&probe, T::one()).is_none() {
            return usage(format!("{} has no prox oracle", nonsmooth.name()));
        }
        Ok(Self {
            smooth,
            nonsmooth,
            lipschitz,
        })
    }

    pub fn smooth(&self) -> &Arc<dyn ConvexFunction<T>> {
        &self.smooth
    }

    pub fn nonsmooth(&self) -> &Arc<dyn ConvexFunction<T>> {
        &self.nonsmooth
    }

    pub fn lipschitz(&self) -> T {
        self.lipschitz
    }

    pub fn smooth_gradient(&self, x: &[T]) -> Vec<T> {
        self.smooth.gradient(x).expect("checked at construction")
    }

    pub fn prox_nonsmooth(&self, x: &[T], step: T) -> Vec<T> {
        self.nonsmooth
            .prox(x, step)
            .expect("checked at construction")
    }
}

impl<T: Real> ConvexFunction<T> for Composite<T> {
    fn dim(&self) -> usize {
        self.smooth.dim()
    }
    fn value(&self, x: &[T]) -> Extended<T> {
        self.smooth.value(x).add(self.nonsmooth.value(x))
    }
    fn nearest_subgradient(&self, x: &[T], shift: &[T]) -> Option<Vec<T>> {
        let g = add(&self.smooth_gradient(x), shift);
        self.nonsmooth.nearest_subgradient(x, &g)
    }
    fn name(&self) -> String {
        format!("{} + {}", self.smooth.name(), self.nonsmooth.name())
    }
}

/// `½‖Ax − y‖² + μ‖x‖₁` as a composite.
pub fn lasso<T: Real>(a: Matrix<T>, y: Vec<T>, mu: T) -> Result<Composite<T>> {
    let n = a.cols();
    let h = LeastSquares::new(a, y)?;
    Composite::new(Arc::new(h), Arc::new(L1Norm { dim: n, weight: mu }))
}

/// `i_{C₁} + ½ dist²(·, C₂)`, the potential of alternating projections.
pub fn alternating_potential<T: Real>(
    c1: Arc<dyn ConvexSet<T>>,
    c2: Arc<dyn ConvexSet<T>>,
) -> Result<Composite<T>> {
    Composite::new(
        Arc::new(HalfSquaredDistance { set: c2 }),
        Arc::new(Indicator { set: c1 }),
    )
}
