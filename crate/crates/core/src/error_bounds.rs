//! Explicit error-bound constants: Hoffman constants and the LASSO bound,
//! feasibility problems with a common inner ball, uniformly convex functions
//! and the piecewise-polynomial exponent rule.

use std::sync::Arc;

use num_rational::Ratio;

use crate::convex::{lasso, Composite};
use crate::desingularization::{
    from_error_bound, Desingularizer, ErrorBoundCertificate, Profile, Region,
};
use crate::error::{check_dim, usage, Error, Result};
use crate::extended::Extended;
use crate::linalg::{distance, dot, norm, norm1, Matrix};
use crate::sampling::{RegionSampler, SamplerShape};
use crate::scalar::Real;
use crate::sets::ConvexSet;

/// Default cap on stacked constraint rows for exact Hoffman enumeration.
pub const HOFFMAN_MAX_ROWS: usize = 24;
/// Default cap on the ambient dimension for exact Hoffman enumeration.
pub const HOFFMAN_MAX_DIM: usize = 10;

/// Polyhedra `X = {Ax ≤ a}` and `Y = {Ex = e}` with a point of `X ∩ Y`.
#[derive(Debug, Clone)]
pub struct LinearSystemPair<T> {
    pub a: Matrix<T>,
    pub a_rhs: Vec<T>,
    pub e: Matrix<T>,
    pub e_rhs: Vec<T>,
    witness: Vec<T>,
}

impl<T: Real> LinearSystemPair<T> {
    pub fn new(
        a: Matrix<T>,
        a_rhs: Vec<T>,
        e: Matrix<T>,
        e_rhs: Vec<T>,
        witness: Vec<T>,
    ) -> Result<Self> {
        let n = witness.len();
        if n == 0 {
            return usage("systems need dimension >= 1");
        }
        if a.rows() > 0 {
            check_dim(n, a.cols())?;
        }
        if e.rows() > 0 {
            check_dim(n, e.cols())?;
        }
        check_dim(a.rows(), a_rhs.len())?;
        check_dim(e.rows(), e_rhs.len())?;
        let sys = Self {
            a,
            a_rhs,
            e,
            e_rhs,
            witness,
        };
        let tol = T::lit(1e-9) * (T::one() + norm(&sys.witness));
        let viol = sys
            .inequality_violation(&sys.witness)
            .max(sys.equality_residual(&sys.witness));
        if viol > tol {
            return Err(Error::Precondition(format!(
                "witness is not in X ∩ Y (violation {viol})"
            )));
        }
        Ok(sys)
    }

    pub fn dim(&self) -> usize {
        self.witness.len()
    }

    pub fn witness(&self) -> &[T] {
        &self.witness
    }

    pub fn stacked_rows(&self) -> usize {
        self.a.rows() + self.e.rows()
    }

    /// `max_i (Aᵢx − aᵢ)₊`
    pub fn inequality_violation(&self, x: &[T]) -> T {
        (0..self.a.rows()).fold(T::zero(), |m, i| {
            m.max(dot(self.a.row(i), x) - self.a_rhs[i])
        })
    }

    /// `‖Ex − e‖`
    pub fn equality_residual(&self, x: &[T]) -> T {
        let r: Vec<T> = (0..self.e.rows())
            .map(|i| dot(self.e.row(i), x) - self.e_rhs[i])
            .collect();
        norm(&r)
    }

    fn constraints(&self, with_equalities: bool) -> Vec<Constraint<T>> {
        let mut out = Vec::new();
        for i in 0..self.a.rows() {
            let row = self.a.row(i).to_vec();
            let nn = dot(&row, &row);
            if nn > T::zero() {
                out.push(Constraint {
                    row,
                    rhs: self.a_rhs[i],
                    norm2: nn,
                    equality: false,
                });
            }
        }
        if with_equalities {
            for i in 0..self.e.rows() {
                let row = self.e.row(i).to_vec();
                let nn = dot(&row, &row);
                if nn > T::zero() {
                    out.push(Constraint {
                        row,
                        rhs: self.e_rhs[i],
                        norm2: nn,
                        equality: true,
                    });
                }
            }
        }
        out
    }
}

struct Constraint<T> {
    row: Vec<T>,
    rhs: T,
    norm2: T,
    equality: bool,
}

impl<T: Real> Constraint<T> {
    fn project(&self, x: &[T]) -> Vec<T> {
        let s = dot(&self.row, x) - self.rhs;
        if !self.equality && s <= T::zero() {
            return x.to_vec();
        }
        let t = s / self.norm2;
        x.iter()
            .zip(&self.row)
            .map(|(&xi, &ri)| xi - t * ri)
            .collect()
    }
}

/// Dykstra's algorithm over halfspaces and hyperplanes.
fn dykstra<T: Real>(cons: &[Constraint<T>], x: &[T], tol: T, max_sweeps: usize) -> Vec<T> {
    let mut z = x.to_vec();
    let mut incr = vec![vec![T::zero(); x.len()]; cons.len()];
    for _ in 0..max_sweeps {
        let mut moved = T::zero();
        for (c, p) in cons.iter().zip(incr.iter_mut()) {
            let shifted: Vec<T> = z.iter().zip(p.iter()).map(|(&a, &b)| a + b).collect();
            let next = c.project(&shifted);
            for ((pi, &si), &ni) in p.iter_mut().zip(&shifted).zip(&next) {
                *pi = si - ni;
            }
            moved = moved.max(distance(&next, &z));
            z = next;
        }
        if moved <= tol {
            break;
        }
    }
    z
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HoffmanMode {
    /// Enumerate linearly independent row subsets, capped as given.
    Exact {
        max_rows: usize,
        max_dim: usize,
    },
    Sampled {
        samples: usize,
        seed: u64,
    },
}

impl HoffmanMode {
    pub fn exact() -> Self {
        HoffmanMode::Exact {
            max_rows: HOFFMAN_MAX_ROWS,
            max_dim: HOFFMAN_MAX_DIM,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundKind {
    Upper,
    Lower,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HoffmanBound<T> {
    pub nu: T,
    pub kind: BoundKind,
    /// Subsets examined (exact) or usable samples (sampled).
    pub count: usize,
}

/// Hoffman constant `ν` with `dist(x, X∩Y) ≤ ν‖Ex − e‖` on `X`.
///
/// Exact mode returns `max 1/σ_min(G_J)` over linearly independent subsets
/// `J` of the stacked rows `[A; E]`, an upper bound. Sampled mode returns the
/// largest observed ratio, a lower bound.
pub fn hoffman_constant<T: Real>(
    sys: &LinearSystemPair<T>,
    mode: HoffmanMode,
) -> Result<HoffmanBound<T>> {
    match mode {
        HoffmanMode::Exact { max_rows, max_dim } => hoffman_exact(sys, max_rows, max_dim),
        HoffmanMode::Sampled { samples, seed } => hoffman_sampled(sys, samples, seed),
    }
}

fn hoffman_exact<T: Real>(
    sys: &LinearSystemPair<T>,
    max_rows: usize,
    max_dim: usize,
) -> Result<HoffmanBound<T>> {
    let n = sys.dim();
    let rows = sys.stacked_rows();
    if rows > max_rows || n > max_dim {
        return Err(Error::Precondition(format!(
            "exact Hoffman enumeration capped at {max_rows} rows and dimension {max_dim} (got {rows} rows, dimension {n}); use sampled mode or supply nu"
        )));
    }
    if sys.e.rows() == 0 {
        return Ok(HoffmanBound {
            nu: T::zero(),
            kind: BoundKind::Upper,
            count: 0,
        });
    }
    let stacked = if sys.a.rows() == 0 {
        sys.e.clone()
    } else {
        sys.a.vstack(&sys.e)?
    };
    let mut best = T::zero();
    let mut count = 0usize;
    for k in 1..=n.min(rows) {
        let mut idx: Vec<usize> = (0..k).collect();
        loop {
            let g = stacked.select_rows(&idx).outer_gram();
            let ev = crate::linalg::symmetric_eigenvalues(&g);
            let (lo, hi) = (ev[0], ev[k - 1]);
            count += 1;
            if lo > T::lit(1e-12) * hi.max(T::one()) {
                best = best.max(lo.sqrt().recip());
            }
            if !next_combination(&mut idx, rows) {
                break;
            }
        }
    }
    Ok(HoffmanBound {
        nu: best,
        kind: BoundKind::Upper,
        count,
    })
}

fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if idx[i] < n - k + i {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

fn hoffman_sampled<T: Real>(
    sys: &LinearSystemPair<T>,
    samples: usize,
    seed: u64,
) -> Result<HoffmanBound<T>> {
    let w: Vec<f64> = sys.witness.iter().map(|v| v.to_f64_lossy()).collect();
    let spread = 1.0 + norm(&sys.witness).to_f64_lossy();
    let mut sampler = RegionSampler::new(
        SamplerShape::Ball {
            center: w,
            radius: 2.0 * spread,
        },
        seed,
    )?;
    let ineq = sys.constraints(false);
    let all = sys.constraints(true);
    let tol = T::lit(1e-13);
    let mut best = T::zero();
    let mut used = 0usize;
    for _ in 0..samples {
        let z: Vec<T> = sampler.sample();
        let x = if ineq.is_empty() {
            z
        } else {
            dykstra(&ineq, &z, tol, 50_000)
        };
        let res = sys.equality_residual(&x);
        if res <= T::lit(1e-10) * (T::one() + norm(&x)) {
            continue;
        }
        let p = dykstra(&all, &x, tol, 50_000);
        best = best.max(distance(&x, &p) / res);
        used += 1;
    }
    Ok(HoffmanBound {
        nu: best,
        kind: BoundKind::Lower,
        count: used,
    })
}

/// `min ½‖Ax − y‖² + μ‖x‖₁` started from `x0`.
#[derive(Debug, Clone)]
pub struct LassoInstance<T> {
    pub a: Matrix<T>,
    pub y: Vec<T>,
    pub mu: T,
    pub x0: Vec<T>,
}

impl<T: Real> LassoInstance<T> {
    pub fn new(a: Matrix<T>, y: Vec<T>, mu: T, x0: Vec<T>) -> Result<Self> {
        check_dim(a.rows(), y.len())?;
        check_dim(a.cols(), x0.len())?;
        if !(mu > T::zero()) {
            return usage("mu must be positive");
        }
        Ok(Self { a, y, mu, x0 })
    }

    pub fn dim(&self) -> usize {
        self.a.cols()
    }

    pub fn objective(&self) -> Result<Composite<T>> {
        lasso(self.a.clone(), self.y.clone(), self.mu)
    }

    pub fn value(&self, x: &[T]) -> T {
        let r: Vec<T> = self
            .a
            .mul_vec(x)
            .expect("dimension checked")
            .iter()
            .zip(&self.y)
            .map(|(&u, &v)| u - v)
            .collect();
        T::half() * dot(&r, &r) + self.mu * norm1(x)
    }

    /// `L = ‖AᵀA‖`
    pub fn lipschitz(&self) -> T {
        let s = self.a.spectral_norm();
        s * s
    }

    /// `R = max(f(x0)/μ, 1 + ‖y‖²/(2μ))`; iterates of any descent method stay
    /// in the `ℓ¹` ball of this radius.
    pub fn radius(&self) -> T {
        let ny = norm(&self.y);
        (self.value(&self.x0) / self.mu).max(T::one() + ny * ny / (T::two() * self.mu))
    }

    /// Sign-row reformulation in `ℝⁿ⁺¹`: `X = {M(x, t) ≤ (0, …, 0, R)}`,
    /// `Y = {[A 0; 0 μ](x, t) = 0}`. Sign rows are in lexicographic order with
    /// `−1 < +1`.
    pub fn hoffman_system(&self) -> Result<LinearSystemPair<T>> {
        let n = self.dim();
        if n > HOFFMAN_MAX_DIM {
            return Err(Error::Precondition(format!(
                "sign-row reformulation has 2^{n}+1 rows; materialized only for n <= {HOFFMAN_MAX_DIM}"
            )));
        }
        let r = self.radius();
        let mut rows = Vec::with_capacity((1 << n) + 1);
        for code in 0..(1usize << n) {
            let mut row: Vec<T> = (0..n)
                .map(|j| {
                    if code >> (n - 1 - j) & 1 == 1 {
                        T::one()
                    } else {
                        -T::one()
                    }
                })
                .collect();
            row.push(-T::one());
            rows.push(row);
        }
        let mut last = vec![T::zero(); n + 1];
        last[n] = T::one();
        rows.push(last);
        let mut rhs = vec![T::zero(); rows.len()];
        rhs[rows.len() - 1] = r;
        let m = Matrix::from_rows(&rows)?;
        let mut eq = Vec::with_capacity(self.a.rows() + 1);
        for i in 0..self.a.rows() {
            let mut row = self.a.row(i).to_vec();
            row.push(T::zero());
            eq.push(row);
        }
        let mut mu_row = vec![T::zero(); n + 1];
        mu_row[n] = self.mu;
        eq.push(mu_row);
        let e = Matrix::from_rows(&eq)?;
        let e_rhs = vec![T::zero(); e.rows()];
        LinearSystemPair::new(m, rhs, e, e_rhs, vec![T::zero(); n + 1])
    }
}

/// Constants of the LASSO error bound `f − min f ≥ 2γ_R dist²(·, S)` on
/// `{‖x‖₁ ≤ R}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LassoConstants<T> {
    pub gamma_r: T,
    pub radius: T,
    pub kappa_r: T,
    pub nu: T,
    pub norm_a: T,
    pub norm_y: T,
}

/// `γ_R` and `κ_R` for explicit `R`, `‖A‖`, `‖y‖`.
pub fn lasso_gamma_for_radius<T: Real>(nu: T, mu: T, r: T, norm_a: T, norm_y: T) -> Result<(T, T)> {
    if !(nu > T::zero()) || !(mu > T::zero()) || !(r > T::zero()) {
        return usage("need nu > 0, mu > 0, R > 0");
    }
    let g = r * norm_a + norm_y;
    let four = T::lit(4.0);
    let gamma = (four * nu * nu * (T::one() + mu * r + g * (four * r * norm_a + norm_y))).recip();
    let kappa =
        nu * nu * (T::two() * r * mu + T::lit(6.0) * g * r * norm_a + T::two() * g * g + T::two());
    Ok((gamma, kappa))
}

pub fn lasso_gamma<T: Real>(inst: &LassoInstance<T>, nu: T) -> Result<LassoConstants<T>> {
    let r = inst.radius();
    let norm_a = inst.a.spectral_norm();
    let norm_y = norm(&inst.y);
    let (gamma_r, kappa_r) = lasso_gamma_for_radius(nu, inst.mu, r, norm_a, norm_y)?;
    Ok(LassoConstants {
        gamma_r,
        radius: r,
        kappa_r,
        nu,
        norm_a,
        norm_y,
    })
}

impl<T: Real> LassoConstants<T> {
    /// `f − min f ≥ 2γ_R dist²` on the `ℓ¹` ball of radius `R`.
    pub fn certificate(&self) -> Result<ErrorBoundCertificate<T>> {
        ErrorBoundCertificate::power(
            T::two() * self.gamma_r,
            T::two(),
            Extended::PosInfinity,
            Region::L1Ball {
                radius: self.radius.to_f64_lossy(),
            },
            format!(
                "lasso: nu={}, R={}, |A|={}, |y|={}",
                self.nu, self.radius, self.norm_a, self.norm_y
            ),
        )
    }
}

/// Closed convex sets with a common inner ball `B(x̄, R)`.
#[derive(Debug, Clone)]
pub struct FeasibilityInstance<T: Real> {
    pub sets: Vec<Arc<dyn ConvexSet<T>>>,
    pub xbar: Vec<T>,
    pub radius: T,
    pub weights: Vec<T>,
}

impl<T: Real> FeasibilityInstance<T> {
    /// Checks `B(x̄, R) ⊆ ∩Cᵢ` on sampled boundary points.
    pub fn new(
        sets: Vec<Arc<dyn ConvexSet<T>>>,
        xbar: Vec<T>,
        radius: T,
        weights: Vec<T>,
    ) -> Result<Self> {
        if sets.len() < 2 {
            return usage("feasibility problems need m >= 2 sets");
        }
        for s in &sets {
            check_dim(xbar.len(), s.dim())?;
        }
        check_dim(sets.len(), weights.len())?;
        if !(radius > T::zero()) {
            return usage("inner radius must be positive");
        }
        let total = weights.iter().fold(T::zero(), |a, &w| a + w);
        if weights.iter().any(|&w| !(w > T::zero())) || (total - T::one()).abs() > T::lit(1e-12) {
            return usage("weights must be positive and sum to 1");
        }
        let inst = Self {
            sets,
            xbar,
            radius,
            weights,
        };
        inst.verify_inner_ball(512, 0)?;
        Ok(inst)
    }

    pub fn with_uniform_weights(
        sets: Vec<Arc<dyn ConvexSet<T>>>,
        xbar: Vec<T>,
        radius: T,
    ) -> Result<Self> {
        let m = sets.len().max(1);
        let w = T::one() / T::from_usize(m).expect("small count");
        Self::new(sets, xbar, radius, vec![w; m])
    }

    fn verify_inner_ball(&self, samples: usize, seed: u64) -> Result<()> {
        let c: Vec<f64> = self.xbar.iter().map(|v| v.to_f64_lossy()).collect();
        let mut s = RegionSampler::new(
            SamplerShape::Sphere {
                center: c,
                radius: self.radius.to_f64_lossy(),
            },
            seed,
        )?;
        let tol = T::lit(1e-9) * (T::one() + self.radius);
        for k in 0..=samples {
            let x: Vec<T> = if k == 0 {
                self.xbar.clone()
            } else {
                s.sample()
            };
            if let Some(i) = self.sets.iter().position(|set| !set.contains(&x, tol)) {
                return Err(Error::Precondition(format!(
                    "inner ball point {x:?} is not in set {i}"
                )));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.xbar.len()
    }

    pub fn min_weight(&self) -> T {
        self.weights.iter().fold(T::infinity(), |a, &w| a.min(w))
    }

    /// Right-hand side of the intersection bound:
    /// `(1 + 2‖x − x̄‖/R)^{m−1} · maxᵢ dist(x, Cᵢ)`.
    pub fn intersection_bound(&self, x: &[T]) -> T {
        let m = self.sets.len() as i32;
        let factor = T::one() + T::two() * distance(x, &self.xbar) / self.radius;
        let worst = self
            .sets
            .iter()
            .fold(T::zero(), |a, s| a.max(s.distance(x)));
        factor.powi(m - 1) * worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeasibilityVariant {
    Barycentric,
    Alternating,
}

/// A feasibility certificate: `ψ(s) = constant·s²/2` and the matching error
/// bound `f − min f ≥ 2·constant·dist²` on `B(x̄, ‖x0 − x̄‖)`.
#[derive(Debug, Clone)]
pub struct FeasibilityBound<T: Real> {
    pub variant: FeasibilityVariant,
    /// `M` (barycentric) or `M′` (alternating).
    pub constant: T,
    /// Start actually used; alternating projections first project onto `C₁`.
    pub x0: Vec<T>,
    pub rho: T,
    pub certificate: ErrorBoundCertificate<T>,
    pub desingularizer: Desingularizer<T>,
}

pub fn feasibility_bound<T: Real>(
    inst: &FeasibilityInstance<T>,
    x0: &[T],
    variant: FeasibilityVariant,
) -> Result<FeasibilityBound<T>> {
    check_dim(inst.dim(), x0.len())?;
    let m = inst.sets.len();
    let quarter = T::lit(0.25);
    let (x0, constant) = match variant {
        FeasibilityVariant::Barycentric => {
            let rho = distance(x0, &inst.xbar);
            let factor = T::one() + T::two() * rho / inst.radius;
            (
                x0.to_vec(),
                quarter * factor.powi(2 - 2 * m as i32) * inst.min_weight(),
            )
        }
        FeasibilityVariant::Alternating => {
            if m != 2 {
                return usage(format!(
                    "alternating projections are certified for m = 2 sets only (got {m})"
                ));
            }
            let c1 = &inst.sets[0];
            let start = if c1.contains(x0, T::lit(1e-12) * (T::one() + norm(x0))) {
                x0.to_vec()
            } else {
                c1.project(x0)
            };
            let rho = distance(&start, &inst.xbar);
            let factor = T::one() + T::two() * rho / inst.radius;
            (start, T::lit(0.125) / (factor * factor))
        }
    };
    let rho = distance(&x0, &inst.xbar);
    let region = Region::Ball {
        center: inst.xbar.iter().map(|v| v.to_f64_lossy()).collect(),
        radius: rho.to_f64_lossy(),
    };
    let certificate = ErrorBoundCertificate::power(
        T::two() * constant,
        T::two(),
        Extended::PosInfinity,
        region,
        format!("{variant:?}: m={m}, R={}, rho={rho}", inst.radius),
    )?;
    let desingularizer = from_error_bound(&certificate)?;
    Ok(FeasibilityBound {
        variant,
        constant,
        x0,
        rho,
        certificate,
        desingularizer,
    })
}

/// Exponent `p = (degree − 1)ⁿ + 1` of the error bound of a convex piecewise
/// polynomial function, together with the exponent `θ = 1 − 1/p`.
pub fn piecewise_poly_exponent(degree: u32, n: u32) -> Result<(u64, Ratio<u64>)> {
    if degree == 0 || n == 0 {
        return usage("degree and dimension must be at least 1");
    }
    let p = u64::from(degree - 1)
        .checked_pow(n)
        .and_then(|v| v.checked_add(1))
        .ok_or_else(|| Error::Usage(format!("exponent overflows for degree {degree}, n = {n}")))?;
    Ok((p, Ratio::new(p - 1, p)))
}

/// Desingularizer `φ(s) = p σ^{−1/p} s^{1/p}` of a `p`-uniformly convex
/// function, with `ℓ = (p − 1)σ α0^{p−2}/p^{p−1}` on `[0, α0]`.
pub fn uniformly_convex_profile<T: Real>(sigma: T, p: T, alpha0: T) -> Result<Desingularizer<T>> {
    if !(p >= T::two()) {
        return usage(format!("uniform convexity needs p >= 2 (got {p})"));
    }
    if !(sigma > T::zero()) || !(alpha0 > T::zero()) {
        return usage("sigma and alpha0 must be positive");
    }
    let profile = Profile::Power {
        scale: p * sigma.powf(-p.recip()),
        exponent: p,
    };
    let ell = (p - T::one()) * sigma * alpha0.powf(p - T::two()) / p.powf(p - T::one());
    Desingularizer::new(profile, Extended::PosInfinity, Region::Everywhere)?.with_ell(ell)
}
