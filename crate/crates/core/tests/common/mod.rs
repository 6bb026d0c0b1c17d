#![allow(dead_code)]

use std::sync::Arc;

use klcert::error_bounds::{FeasibilityInstance, LassoInstance, LinearSystemPair};
use klcert::linalg::{dot, Matrix};
use klcert::sets::{Ball, ConvexSet, HalfSpace};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gauss_vec(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| r.sample(StandardNormal)).collect()
}

pub fn gauss_matrix(r: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix<f64> {
    Matrix::new(rows, cols, gauss_vec(r, rows * cols)).unwrap()
}

pub fn random_lasso(r: &mut ChaCha8Rng, m: usize, n: usize) -> LassoInstance<f64> {
    let a = gauss_matrix(r, m, n);
    let y = gauss_vec(r, m);
    let mu = r.random_range(0.05..1.0);
    let x0 = gauss_vec(r, n);
    LassoInstance::new(a, y, mu, x0).unwrap()
}

/// Two or three sets in the plane, each containing `B(x̄, R)`.
pub fn random_feasibility(r: &mut ChaCha8Rng, m: usize) -> FeasibilityInstance<f64> {
    let xbar = gauss_vec(r, 2);
    let radius = r.random_range(0.1..0.6);
    let mut sets: Vec<Arc<dyn ConvexSet<f64>>> = Vec::new();
    for i in 0..m {
        let dir = unit(r);
        if i % 2 == 0 {
            let t = r.random_range(0.5..3.0);
            let c = [xbar[0] + t * dir[0], xbar[1] + t * dir[1]];
            let rad = t + radius + r.random_range(0.0..0.3);
            sets.push(Arc::new(Ball::new(c.to_vec(), rad).unwrap()));
        } else {
            let off = dot(&dir, &xbar) + radius + r.random_range(0.0..0.3);
            sets.push(Arc::new(HalfSpace::new(dir.to_vec(), off).unwrap()));
        }
    }
    FeasibilityInstance::with_uniform_weights(sets, xbar, radius).unwrap()
}

pub fn unit(r: &mut ChaCha8Rng) -> [f64; 2] {
    let t: f64 = r.random_range(0.0..std::f64::consts::TAU);
    [t.cos(), t.sin()]
}

/// Random `{Ax ≤ a} ∩ {Ex = e}` through a random witness.
pub fn random_system(
    r: &mut ChaCha8Rng,
    n: usize,
    ineq: usize,
    eq: usize,
) -> LinearSystemPair<f64> {
    let w = gauss_vec(r, n);
    let a = gauss_matrix(r, ineq, n);
    let slack: Vec<f64> = (0..ineq).map(|_| r.random_range(0.0..0.5)).collect();
    let a_rhs: Vec<f64> = a
        .mul_vec(&w)
        .unwrap()
        .iter()
        .zip(&slack)
        .map(|(v, s)| v + s)
        .collect();
    let e = gauss_matrix(r, eq, n);
    let e_rhs = e.mul_vec(&w).unwrap();
    LinearSystemPair::new(a, a_rhs, e, e_rhs, w).unwrap()
}
