//! Brute-force reference minimizers for tiny instances.

use crate::error::{usage, Result};
use crate::error_bounds::LassoInstance;
use crate::linalg::{cholesky_solve, norm, Matrix};
use crate::scalar::Real;

/// A minimizer together with the minimum value.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceMinimum<T> {
    pub x: Vec<T>,
    pub value: T,
}

/// Coarse-to-fine grid search of `f` over a box: `points` grid points per
/// axis, then the box shrinks around the best point, `levels` times.
pub fn grid_minimize<T: Real>(
    f: impl Fn(&[T]) -> T,
    lower: &[T],
    upper: &[T],
    points: usize,
    levels: usize,
) -> Result<ReferenceMinimum<T>> {
    let n = lower.len();
    if n == 0 || n != upper.len() || points < 2 {
        return usage("grid needs matching nonempty bounds and at least 2 points per axis");
    }
    let (mut lo, mut hi) = (lower.to_vec(), upper.to_vec());
    let mut best = ReferenceMinimum {
        x: lo.clone(),
        value: f(&lo),
    };
    let span = T::from_usize(points - 1).expect("grid size");
    for _ in 0..levels.max(1) {
        let h: Vec<T> = lo.iter().zip(&hi).map(|(&l, &u)| (u - l) / span).collect();
        let mut idx = vec![0usize; n];
        loop {
            let x: Vec<T> = (0..n)
                .map(|i| lo[i] + h[i] * T::from_usize(idx[i]).expect("index"))
                .collect();
            let v = f(&x);
            if v < best.value {
                best = ReferenceMinimum { x, value: v };
            }
            let mut i = 0;
            while i < n {
                idx[i] += 1;
                if idx[i] < points {
                    break;
                }
                idx[i] = 0;
                i += 1;
            }
            if i == n {
                break;
            }
        }
        for i in 0..n {
            lo[i] = (best.x[i] - h[i]).max(lower[i]);
            hi[i] = (best.x[i] + h[i]).min(upper[i]);
        }
    }
    Ok(best)
}

/// Reference LASSO minimizer: grid to resolution about `1e-3` (n ≤ 4), proximal
/// gradient polish, then an exact solve of the KKT system on the detected
/// support.
pub fn lasso_minimizer<T: Real>(inst: &LassoInstance<T>) -> Result<ReferenceMinimum<T>> {
    let n = inst.dim();
    let ny = norm(&inst.y);
    // every minimizer has ‖x‖₁ ≤ ‖y‖²/(2μ)
    let r = (ny * ny / (T::two() * inst.mu)).max(T::lit(1e-3));
    let f = |x: &[T]| inst.value(x);
    let points = match n {
        1 => 201,
        2 => 61,
        3 => 21,
        _ => 11,
    };
    let mut levels = 1;
    let mut width = T::two() * r / T::from_usize(points - 1).expect("grid size");
    while width > T::lit(1e-3) && levels < 60 {
        width = width * T::two() / T::from_usize(points - 1).expect("grid size");
        levels += 1;
    }
    // the problem is convex, so the grid only supplies a good start; past
    // n = 4 it is too expensive and the polish starts from the origin
    let start = if n <= 4 {
        grid_minimize(f, &vec![-r; n], &vec![r; n], points, levels)?.x
    } else {
        vec![T::zero(); n]
    };
    let polished = polish(inst, start, 200_000);
    let mut best = ReferenceMinimum {
        value: inst.value(&polished),
        x: polished,
    };
    if let Some(kkt) = kkt_refine(inst, &best.x) {
        let v = inst.value(&kkt);
        if v <= best.value {
            best = ReferenceMinimum { x: kkt, value: v };
        }
    }
    Ok(best)
}

fn polish<T: Real>(inst: &LassoInstance<T>, mut x: Vec<T>, iters: usize) -> Vec<T> {
    let l = inst.lipschitz().max(T::lit(1e-12));
    let lam = T::one() / l;
    for _ in 0..iters {
        let r: Vec<T> = inst
            .a
            .mul_vec(&x)
            .expect("dims")
            .iter()
            .zip(&inst.y)
            .map(|(&u, &v)| u - v)
            .collect();
        let g = inst.a.tr_mul_vec(&r).expect("dims");
        let next: Vec<T> = x
            .iter()
            .zip(&g)
            .map(|(&xi, &gi)| crate::convex::soft_threshold(xi - lam * gi, lam * inst.mu))
            .collect();
        let moved = crate::linalg::distance(&next, &x);
        x = next;
        if moved <= T::lit(1e-15) * (T::one() + norm(&x)) {
            break;
        }
    }
    x
}

/// Solves `A_Sᵀ A_S x_S = A_Sᵀ y − μ sign(x_S)` on the support of `x` and
/// accepts the result if signs and the off-support KKT conditions hold.
fn kkt_refine<T: Real>(inst: &LassoInstance<T>, x: &[T]) -> Option<Vec<T>> {
    let n = x.len();
    let scale = norm(x).max(T::one());
    let support: Vec<usize> = (0..n)
        .filter(|&i| x[i].abs() > T::lit(1e-9) * scale)
        .collect();
    let mut out = vec![T::zero(); n];
    if !support.is_empty() {
        let cols: Vec<Vec<T>> = (0..inst.a.rows())
            .map(|i| support.iter().map(|&j| inst.a.get(i, j)).collect())
            .collect();
        let a_s = Matrix::from_rows(&cols).ok()?;
        let rhs: Vec<T> = a_s
            .tr_mul_vec(&inst.y)
            .ok()?
            .iter()
            .zip(&support)
            .map(|(&v, &j)| v - inst.mu * x[j].signum())
            .collect();
        let sol = cholesky_solve(&a_s.gram(), &rhs).ok()?;
        for (&j, &v) in support.iter().zip(&sol) {
            if v.signum() != x[j].signum() {
                return None;
            }
            out[j] = v;
        }
    }
    let r: Vec<T> = inst
        .a
        .mul_vec(&out)
        .ok()?
        .iter()
        .zip(&inst.y)
        .map(|(&u, &v)| u - v)
        .collect();
    let g = inst.a.tr_mul_vec(&r).ok()?;
    let slack = T::lit(1e-9) * (T::one() + inst.mu);
    for j in 0..n {
        if !support.contains(&j) && g[j].abs() > inst.mu + slack {
            return None;
        }
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_finds_quadratic_minimum() {
        let m = grid_minimize(
            |x: &[f64]| (x[0] - 0.3).powi(2) + 2.0 * (x[1] + 0.7).powi(2),
            &[-2.0, -2.0],
            &[2.0, 2.0],
            21,
            12,
        )
        .unwrap();
        assert!((m.x[0] - 0.3).abs() < 1e-9 && (m.x[1] + 0.7).abs() < 1e-9);
    }

    #[test]
    fn lasso_identity_closed_form() {
        // A = I: minimizer is the soft threshold of y
        let inst =
            LassoInstance::<f64>::new(Matrix::identity(3), vec![2.0, -0.3, 0.9], 0.5, vec![0.0; 3])
                .unwrap();
        let m = lasso_minimizer(&inst).unwrap();
        let expect = [1.5, 0.0, 0.4];
        for (a, b) in m.x.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12, "{:?}", m.x);
        }
        assert!((m.value - inst.value(&expect)).abs() < 1e-14);
    }
}
