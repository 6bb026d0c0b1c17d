mod common;

use klcert::desingularization::{Desingularizer, Profile, Region};
use klcert::error_bounds::{hoffman_constant, HoffmanMode};
use klcert::linalg::distance;
use klcert::majorant::{prox_sequence, ProxMethod};
use klcert::sets::project_intersection_2d;
use klcert::Extended;
use proptest::prelude::*;
use rand::Rng;

#[test]
fn sampled_hoffman_never_exceeds_enumeration() {
    let mut r = common::rng(17);
    for i in 0..20 {
        let n = 1 + i % 3;
        let ineq = i % 4;
        let eq = 1 + i % 2;
        let sys = common::random_system(&mut r, n, ineq, eq);
        let upper = hoffman_constant(&sys, HoffmanMode::exact()).unwrap();
        let lower = hoffman_constant(
            &sys,
            HoffmanMode::Sampled {
                samples: 200,
                seed: i as u64,
            },
        )
        .unwrap();
        assert!(lower.count > 0);
        assert!(
            lower.nu <= upper.nu * (1.0 + 1e-6) + 1e-9,
            "system {i}: sampled {} > exact {}",
            lower.nu,
            upper.nu
        );
    }
}

#[test]
fn intersection_bound_on_samples() {
    let mut r = common::rng(23);
    let mut checked = 0;
    for i in 0..10 {
        let inst = common::random_feasibility(&mut r, 2 + i % 2);
        for _ in 0..1000 {
            let x: Vec<f64> = common::gauss_vec(&mut r, 2)
                .iter()
                .zip(&inst.xbar)
                .map(|(v, c)| c + 3.0 * v)
                .collect();
            let p = project_intersection_2d(&inst.sets, &x).unwrap();
            let d = distance(&x, &p);
            assert!(
                d <= inst.intersection_bound(&x) + 1e-9,
                "{d} > {}",
                inst.intersection_bound(&x)
            );
            checked += 1;
        }
    }
    assert_eq!(checked, 10_000);
}

fn quadratic() -> Desingularizer<f64> {
    Desingularizer::new(
        Profile::QuadraticInverse { ell: 1.3 },
        Extended::PosInfinity,
        Region::Everywhere,
    )
    .unwrap()
}

fn quartic() -> Desingularizer<f64> {
    // ψ(α) = (α/4)⁴·σ with σ = 2
    Desingularizer::new(
        Profile::Power {
            scale: 4.0 * 2.0_f64.powf(-0.25),
            exponent: 4.0,
        },
        Extended::PosInfinity,
        Region::Everywhere,
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn larger_steps_from_lower_start_stay_below(
        seed in any::<u64>(),
        start in 0.01..5.0_f64,
        lift in 0.0..2.0_f64,
    ) {
        let mut r = common::rng(seed);
        let big: Vec<f64> = (0..200).map(|_| r.random_range(0.01..3.0)).collect();
        let small: Vec<f64> = big.iter().map(|&s| s * r.random_range(0.05..1.0)).collect();
        for d in [quadratic(), quartic()] {
            for method in [ProxMethod::Auto, ProxMethod::Bisection] {
                let b0 = prox_sequence(&d, start, &big, method).unwrap();
                let b1 = prox_sequence(&d, start + lift, &small, method).unwrap();
                for (u, v) in b0.iter().zip(&b1) {
                    prop_assert!(*u <= v + 1e-12);
                }
            }
        }
    }
}
