//! The one-dimensional worst-case proximal sequence `α_{k+1} = prox_{ζψ}(α_k)`
//! and closed-form complexity constants for quadratic `ψ`.

use crate::descent::DescentParams;
use crate::desingularization::{Desingularizer, Profile};
use crate::error::{usage, Error, Result};
use crate::extended::Extended;
use crate::scalar::Real;

/// Iteration cap of the monotone bisection for the generic prox step.
pub const BISECTION_ITERS: usize = 200;

/// `ζ = (√(1 + 2ℓab⁻²) − 1)/ℓ`, evaluated without cancellation.
pub fn zeta<T: Real>(a: T, b: T, ell: T) -> Result<T> {
    if !(a > T::zero() && b > T::zero() && ell > T::zero())
        || !(a.is_finite() && b.is_finite() && ell.is_finite())
    {
        return usage("zeta needs finite positive a, b, ell");
    }
    let r = a / (b * b);
    Ok(T::two() * r / ((T::one() + T::two() * ell * r).sqrt() + T::one()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProxMethod {
    /// Closed form when `ψ` is quadratic, bisection otherwise.
    #[default]
    Auto,
    Bisection,
}

/// `ψ″` when `ψ` is exactly quadratic.
fn quadratic_curvature<T: Real>(profile: &Profile<T>) -> Option<T> {
    match profile {
        Profile::QuadraticInverse { ell } => Some(*ell),
        Profile::Power { scale, exponent } if *exponent == T::two() => {
            Some(T::two() / (*scale * *scale))
        }
        _ => None,
    }
}

/// `argmin_{u ≥ 0} ψ(u) + (u − α)²/(2ζ)`.
pub fn prox_step<T: Real>(d: &Desingularizer<T>, zeta: T, alpha: T, method: ProxMethod) -> T {
    if alpha <= T::zero() {
        return T::zero();
    }
    if method == ProxMethod::Auto {
        if let Some(c) = quadratic_curvature(d.profile()) {
            return alpha / (T::one() + c * zeta);
        }
    }
    // u ↦ ψ′(u) + (u − α)/ζ is increasing, negative at 0 and nonnegative at α
    let (mut lo, mut hi) = (T::zero(), alpha);
    for _ in 0..BISECTION_ITERS {
        let mid = (lo + hi) / T::two();
        if mid <= lo || mid >= hi {
            break;
        }
        if d.dpsi(mid) + (mid - alpha) / zeta < T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo + hi) / T::two()
}

/// `β_{k+1} = prox_{λ_k ψ}(β_k)` for an arbitrary step sequence.
pub fn prox_sequence<T: Real>(
    d: &Desingularizer<T>,
    beta0: T,
    steps: &[T],
    method: ProxMethod,
) -> Result<Vec<T>> {
    if steps.iter().any(|&s| !(s > T::zero())) {
        return usage("prox steps must be positive");
    }
    let mut out = Vec::with_capacity(steps.len() + 1);
    out.push(beta0);
    for &s in steps {
        let last = *out.last().expect("nonempty");
        out.push(prox_step(d, s, last, method));
    }
    Ok(out)
}

/// `q`, `C`, `σ` of the quadratic-profile complexity bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticComplexity<T> {
    pub q: T,
    pub c: T,
    pub sigma: T,
    pub f0: T,
}

impl<T: Real> QuadraticComplexity<T> {
    /// `f0/qᵏ`
    pub fn value_bound(&self, k: usize) -> T {
        self.f0 / self.q.powi(k as i32)
    }

    /// `C√f0/q^{(k−1)/2}` for `k ≥ 1`.
    pub fn distance_bound(&self, k: usize) -> T {
        let e = (T::from_usize(k).expect("step index") - T::one()) / T::two();
        self.c * self.f0.sqrt() / self.q.powf(e)
    }
}

/// `q = 1 + 2aσ`, `C = a^{−1/2}(1 + 1/(aσ√(1 + 1/(2aσ))))` with `σ = ℓ/b²`.
pub fn quadratic_complexity<T: Real>(
    ell: T,
    params: DescentParams<T>,
    f0: T,
) -> Result<QuadraticComplexity<T>> {
    if !(ell > T::zero()) || !(f0 >= T::zero()) {
        return usage("need ell > 0 and f0 >= 0");
    }
    let (a, b) = (params.a, params.b);
    let sigma = ell / (b * b);
    let s = a * sigma;
    let q = T::one() + T::two() * s;
    let c = (T::one() + (s * (T::one() + (T::two() * s).recip()).sqrt()).recip()) / a.sqrt();
    Ok(QuadraticComplexity { q, c, sigma, f0 })
}

/// Smallest `k` with `f0/qᵏ ≤ eps`.
pub fn steps_to_epsilon<T: Real>(q: T, f0: T, eps: T) -> Result<u64> {
    if !(q > T::one()) || !(f0 > T::zero()) || !(eps > T::zero()) {
        return usage("steps_to_epsilon needs q > 1, f0 > 0, eps > 0");
    }
    if eps >= f0 {
        return Ok(0);
    }
    let est = ((f0 / eps).ln() / q.ln()).ceil().to_f64_lossy();
    if !est.is_finite() || est > 1e15 {
        return Err(Error::NonFinite(format!("step count for q = {q}")));
    }
    let mut k = est as u64;
    let bound = |k: u64| f0 / q.powf(T::lit(k as f64));
    while bound(k) > eps {
        k += 1;
    }
    while k > 0 && bound(k - 1) <= eps {
        k -= 1;
    }
    Ok(k)
}

/// The sequence `α₀ = φ(r0)`, `α_{k+1} = prox_{ζψ}(α_k)`.
#[derive(Debug, Clone)]
pub struct MajorantSequence<T> {
    pub zeta: T,
    pub ell: T,
    pub params: DescentParams<T>,
    pub alpha: Vec<T>,
    /// `ψ(α_k)`, the certified bound on `f(x_k) − min f`.
    pub psi_alpha: Vec<T>,
    pub closed_form: Option<QuadraticComplexity<T>>,
}

impl<T: Real> MajorantSequence<T> {
    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    pub fn value_bound(&self, k: usize) -> Option<T> {
        self.psi_alpha.get(k).copied()
    }

    /// `(b/a)α_k + √(ψ(α_{k−1})/a)` for `k ≥ 1`.
    pub fn distance_bound(&self, k: usize) -> Option<T> {
        if k == 0 || k >= self.alpha.len() {
            return None;
        }
        let DescentParams { a, b } = self.params;
        Some(b / a * self.alpha[k] + (self.psi_alpha[k - 1] / a).sqrt())
    }

    /// Index where the log-decrement of `α_k` changes most, a crude marker of
    /// the switch between the sublinear and linear regimes.
    pub fn regime_break(&self) -> Option<usize> {
        let logs: Vec<T> = self
            .alpha
            .windows(2)
            .take_while(|w| w[0] > T::zero() && w[1] > T::zero())
            .map(|w| (w[1] / w[0]).ln())
            .collect();
        (0..logs.len().saturating_sub(1))
            .map(|i| (i + 1, (logs[i + 1] - logs[i]).abs()))
            .max_by(|x, y| x.1.partial_cmp(&y.1).unwrap_or(std::cmp::Ordering::Equal))
            .map(|(i, _)| i)
    }
}

/// Builds the worst-case sequence for a run starting at gap `r0`.
pub fn worst_case_sequence<T: Real>(
    d: &Desingularizer<T>,
    r0: T,
    params: DescentParams<T>,
    steps: usize,
    method: ProxMethod,
) -> Result<MajorantSequence<T>> {
    params.validate()?;
    if !(r0 >= T::zero()) {
        return usage("initial gap r0 must be nonnegative");
    }
    if Extended::Finite(r0) >= d.r0() {
        return Err(Error::Precondition(format!(
            "initial gap {r0} exceeds validity radius {}",
            d.r0()
        )));
    }
    let alpha0 = d.phi(r0);
    let probe = if alpha0 > T::zero() { alpha0 } else { T::one() };
    let ell = d.ell(probe)?;
    let z = zeta(params.a, params.b, ell)?;
    let mut alpha = Vec::with_capacity(steps + 1);
    alpha.push(alpha0);
    for _ in 0..steps {
        let last = *alpha.last().expect("nonempty");
        alpha.push(prox_step(d, z, last, method));
    }
    let psi_alpha: Vec<T> = alpha.iter().map(|&a| d.psi(a)).collect();
    let closed_form = match quadratic_curvature(d.profile()) {
        Some(c) if c == ell => Some(quadratic_complexity(ell, params, psi_alpha[0])?),
        _ => None,
    };
    Ok(MajorantSequence {
        zeta: z,
        ell,
        params,
        alpha,
        psi_alpha,
        closed_form,
    })
}
