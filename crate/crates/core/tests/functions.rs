mod common;

use std::sync::Arc;

use klcert::convex::{
    lasso, ConvexFunction, ConvexObjective, FeasibilityPotential, HalfSquaredDistance, Indicator,
    L1Norm, LeastSquares,
};
use klcert::linalg::{distance, norm, Matrix};
use klcert::reference::grid_minimize;
use klcert::sets::{Ball, BoxSet, ConvexSet, HalfSpace};
use proptest::prelude::*;

fn value(f: &dyn ConvexFunction<f64>, x: &[f64]) -> f64 {
    f.value(x).to_f64()
}

fn prox_family() -> Vec<Arc<dyn ConvexFunction<f64>>> {
    let disk: Arc<dyn ConvexSet<f64>> = Arc::new(Ball::new(vec![0.5, -0.2], 1.3).unwrap());
    let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![-0.5, 0.3], vec![0.0, 1.0]]).unwrap();
    vec![
        Arc::new(L1Norm {
            dim: 2,
            weight: 0.7,
        }),
        Arc::new(Indicator { set: disk.clone() }),
        Arc::new(HalfSquaredDistance { set: disk }),
        Arc::new(LeastSquares::new(a, vec![1.0, 0.0, -2.0]).unwrap()),
    ]
}

proptest! {
    #[test]
    fn prox_is_nonexpansive(
        x in prop::collection::vec(-5.0..5.0_f64, 2),
        y in prop::collection::vec(-5.0..5.0_f64, 2),
        step in 0.01..4.0_f64,
    ) {
        for f in prox_family() {
            let obj = ConvexObjective::normalized(f);
            let px = obj.prox(&x, step).unwrap();
            let py = obj.prox(&y, step).unwrap();
            prop_assert!(distance(&px, &py) <= distance(&x, &y) * (1.0 + 1e-12) + 1e-12);
        }
    }
}

#[test]
fn prox_matches_grid_minimization() {
    let mut r = common::rng(11);
    for f in prox_family() {
        for _ in 0..5 {
            let x = common::gauss_vec(&mut r, 2);
            let step = 0.3 + rand::Rng::random_range(&mut r, 0.0..1.5);
            let p = ConvexObjective::normalized(f.clone())
                .prox(&x, step)
                .unwrap();
            let model = |u: &[f64]| {
                let v = f.value(u).finite().unwrap_or(1e300);
                v + distance(u, &x).powi(2) / (2.0 * step)
            };
            // the prox lies within |x − z| of x for any z with finite value; use a wide box
            let lo: Vec<f64> = x.iter().map(|v| v - 6.0).collect();
            let hi: Vec<f64> = x.iter().map(|v| v + 6.0).collect();
            let g = grid_minimize(model, &lo, &hi, 61, 14).unwrap();
            // grid points cannot sit on a curved boundary, so indicators get a looser match
            let tol = if f.name().starts_with("indicator") {
                2e-3
            } else {
                1e-4
            };
            assert!(
                model(&p) <= g.value + 1e-12,
                "{}: prox is not optimal",
                f.name()
            );
            assert!(
                distance(&g.x, &p) < tol,
                "{}: grid {:?} vs prox {p:?}",
                f.name(),
                g.x
            );
        }
    }
}

#[test]
fn convexity_inequality_on_random_pairs() {
    let mut r = common::rng(5);
    let inst = common::random_lasso(&mut r, 4, 3);
    let c1: Arc<dyn ConvexSet<f64>> = Arc::new(Ball::new(vec![0.0, 0.0, 1.0], 2.0).unwrap());
    let c2: Arc<dyn ConvexSet<f64>> = Arc::new(HalfSpace::new(vec![1.0, -1.0, 0.5], 0.3).unwrap());
    let c3: Arc<dyn ConvexSet<f64>> =
        Arc::new(BoxSet::new(vec![-1.0; 3], vec![1.0, 2.0, 0.5]).unwrap());
    let funcs: Vec<Arc<dyn ConvexFunction<f64>>> = vec![
        Arc::new(inst.objective().unwrap()),
        Arc::new(FeasibilityPotential {
            sets: vec![c1, c2.clone(), c3],
            weights: vec![0.2, 0.5, 0.3],
        }),
        Arc::new(HalfSquaredDistance { set: c2 }),
    ];
    for f in &funcs {
        for _ in 0..1000 {
            let x = common::gauss_vec(&mut r, 3)
                .iter()
                .map(|v| 3.0 * v)
                .collect::<Vec<_>>();
            let y = common::gauss_vec(&mut r, 3)
                .iter()
                .map(|v| 3.0 * v)
                .collect::<Vec<_>>();
            let t: f64 = rand::Rng::random_range(&mut r, 0.0..1.0);
            let z: Vec<f64> = x
                .iter()
                .zip(&y)
                .map(|(a, b)| t * a + (1.0 - t) * b)
                .collect();
            let lhs = value(f.as_ref(), &z);
            let rhs = t * value(f.as_ref(), &x) + (1.0 - t) * value(f.as_ref(), &y);
            assert!(
                lhs <= rhs + 1e-10 * (1.0 + rhs.abs()),
                "{}: {lhs} > {rhs}",
                f.name()
            );
        }
    }
}

/// `min ‖g + μt‖ over t ∈ [−1, 1]ⁿ` restricted to the zero coordinates of
/// `x`, by projected gradient.
fn box_qp_subgradient(g: &[f64], x: &[f64], mu: f64) -> Vec<f64> {
    let mut t: Vec<f64> = x
        .iter()
        .map(|&v| {
            if v > 0.0 {
                1.0
            } else if v < 0.0 {
                -1.0
            } else {
                0.0
            }
        })
        .collect();
    let step = 0.5 / (mu * mu);
    for _ in 0..2000 {
        for i in 0..t.len() {
            if x[i] == 0.0 {
                let grad = mu * (g[i] + mu * t[i]);
                t[i] = (t[i] - step * grad).clamp(-1.0, 1.0);
            }
        }
    }
    g.iter().zip(&t).map(|(gi, ti)| gi + mu * ti).collect()
}

#[test]
fn lasso_min_norm_subgradient_matches_box_qp() {
    let mut r = common::rng(3);
    for trial in 0..50 {
        let m = 2 + trial % 4;
        let n = 1 + trial % 5;
        let inst = common::random_lasso(&mut r, m, n);
        let obj = ConvexObjective::normalized(Arc::new(
            lasso(inst.a.clone(), inst.y.clone(), inst.mu).unwrap(),
        ));
        let mut x = common::gauss_vec(&mut r, n);
        for (i, v) in x.iter_mut().enumerate() {
            if i % 2 == trial % 2 {
                *v = 0.0;
            }
        }
        let resid: Vec<f64> = inst
            .a
            .mul_vec(&x)
            .unwrap()
            .iter()
            .zip(&inst.y)
            .map(|(a, b)| a - b)
            .collect();
        let g = inst.a.tr_mul_vec(&resid).unwrap();
        let oracle = box_qp_subgradient(&g, &x, inst.mu);
        let got = obj.min_norm_subgradient(&x).unwrap();
        let v = got.vector().unwrap();
        assert!(
            distance(v, &oracle) < 1e-9 * (1.0 + norm(&oracle)),
            "{v:?} vs {oracle:?}"
        );
    }
}
