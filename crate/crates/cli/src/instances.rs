//! Problem instances: generation, JSON files and reference minima.

use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use klcert::error_bounds::{FeasibilityInstance, LassoInstance, HOFFMAN_MAX_DIM, HOFFMAN_MAX_ROWS};
use klcert::linalg::{dot, norm, Matrix};
use klcert::reference::lasso_minimizer;
use klcert::sets::{ConvexSet, SetSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::config::{FamilySpec, SetShapes};
use crate::io::write_atomic;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Instance {
    Lasso(LassoData),
    Feasibility(FeasibilityData),
    UniformlyConvex(UniformlyConvexData),
}

/// `½‖Ax − y‖² + μ‖x‖₁`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoData {
    pub a: Matrix<f64>,
    pub y: Vec<f64>,
    pub mu: f64,
    pub x0: Vec<f64>,
    pub minimizer: Vec<f64>,
    pub min_value: f64,
}

/// Sets containing the inner ball `B(xbar, radius)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityData {
    pub sets: Vec<SetSpec>,
    pub xbar: Vec<f64>,
    pub radius: f64,
    pub weights: Vec<f64>,
    pub x0: Vec<f64>,
}

/// `σ‖x − center‖^p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformlyConvexData {
    pub center: Vec<f64>,
    pub sigma: f64,
    pub p: f64,
    pub x0: Vec<f64>,
}

const MAX_START_DRAWS: usize = 1000;
const START_MARGIN: f64 = 1e-3;

fn gauss(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| r.sample(StandardNormal)).collect()
}

fn unit(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let v = gauss(r, n);
        let nv = norm(&v);
        if nv > 1e-8 {
            return v.iter().map(|x| x / nv).collect();
        }
    }
}

/// Builds an instance. With `exact_nu`, LASSO sizes must fit the exact
/// Hoffman enumeration.
pub fn generate(spec: &FamilySpec, exact_nu: bool) -> Result<Instance> {
    match *spec {
        FamilySpec::Lasso { m, n, mu, seed } => {
            if m == 0 || n == 0 || !(mu > 0.0) {
                bail!("lasso needs m, n >= 1 and mu > 0");
            }
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            let scale = 1.0 / (m as f64).sqrt();
            let a = Matrix::new(
                m,
                n,
                gauss(&mut r, m * n).iter().map(|v| v * scale).collect(),
            )?;
            let y = gauss(&mut r, m);
            let x0 = gauss(&mut r, n);
            let inst = LassoInstance::new(a, y, mu, x0)?;
            if exact_nu {
                let rows = inst.hoffman_system()?.stacked_rows();
                if rows > HOFFMAN_MAX_ROWS || n + 1 > HOFFMAN_MAX_DIM {
                    bail!(
                        "lasso m = {m}, n = {n} gives a {rows}-row Hoffman system in dimension {}; exact enumeration is capped at {HOFFMAN_MAX_ROWS} rows and dimension {HOFFMAN_MAX_DIM}. Use a sampled nu instead",
                        n + 1
                    );
                }
            }
            let best = lasso_minimizer(&inst)?;
            Ok(Instance::Lasso(LassoData {
                a: inst.a,
                y: inst.y,
                mu,
                x0: inst.x0,
                minimizer: best.x,
                min_value: best.value,
            }))
        }
        FamilySpec::Feasibility {
            dim,
            sets,
            shapes,
            seed,
        } => {
            if dim == 0 || sets < 2 {
                bail!("feasibility needs dim >= 1 and at least 2 sets");
            }
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            let xbar = gauss(&mut r, dim);
            let radius = r.random_range(0.1..0.6);
            let mut specs = Vec::with_capacity(sets);
            for i in 0..sets {
                let u = unit(&mut r, dim);
                let disk = shapes == SetShapes::Disks || i % 2 == 0;
                if disk {
                    let t = r.random_range(0.5..3.0);
                    let center = xbar.iter().zip(&u).map(|(c, v)| c + t * v).collect();
                    specs.push(SetSpec::Ball {
                        center,
                        radius: t + radius + r.random_range(0.0..0.3),
                    });
                } else {
                    let offset = dot(&u, &xbar) + radius + r.random_range(0.0..0.3);
                    specs.push(SetSpec::HalfSpace { normal: u, offset });
                }
            }
            let mut data = FeasibilityData {
                sets: specs,
                xbar,
                radius,
                weights: vec![1.0 / sets as f64; sets],
                x0: Vec::new(),
            };
            // redraw until projecting onto C₁ does not already land in C₂; when
            // C₁ ⊂ C₂ no start qualifies and the first two sets swap roles
            'orders: for _ in 0..2 {
                let objects = data.set_objects()?;
                for _ in 0..MAX_START_DRAWS {
                    let dir = unit(&mut r, dim);
                    let dist = r.random_range(2.0..5.0);
                    let x0: Vec<f64> = data
                        .xbar
                        .iter()
                        .zip(&dir)
                        .map(|(c, v)| c + dist * v)
                        .collect();
                    if objects[1].distance(&objects[0].project(&x0)) > START_MARGIN {
                        data.x0 = x0;
                        break 'orders;
                    }
                }
                data.sets.swap(0, 1);
            }
            if data.x0.is_empty() {
                bail!("no start found whose projection onto C1 lies outside C2 (seed {seed})");
            }
            data.build()?;
            Ok(Instance::Feasibility(data))
        }
        FamilySpec::UniformlyConvex {
            dim,
            sigma,
            p,
            seed,
        } => {
            if p != 2.0 {
                bail!("only p = 2 uniformly convex instances are generated (got p = {p})");
            }
            if dim == 0 || !(sigma > 0.0) {
                bail!("uniformly convex needs dim >= 1 and sigma > 0");
            }
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            let center = gauss(&mut r, dim);
            let x0 = center
                .iter()
                .zip(gauss(&mut r, dim))
                .map(|(c, v)| c + 2.0 * v)
                .collect();
            Ok(Instance::UniformlyConvex(UniformlyConvexData {
                center,
                sigma,
                p,
                x0,
            }))
        }
    }
}

impl LassoData {
    pub fn build(&self) -> Result<LassoInstance<f64>> {
        Ok(LassoInstance::new(
            self.a.clone(),
            self.y.clone(),
            self.mu,
            self.x0.clone(),
        )?)
    }

    /// LASSO data with a reference minimum computed here.
    pub fn from_parts(a: Matrix<f64>, y: Vec<f64>, mu: f64, x0: Vec<f64>) -> Result<Self> {
        let inst = LassoInstance::new(a, y, mu, x0)?;
        let best = lasso_minimizer(&inst)?;
        Ok(Self {
            a: inst.a,
            y: inst.y,
            mu,
            x0: inst.x0,
            minimizer: best.x,
            min_value: best.value,
        })
    }
}

impl FeasibilityData {
    pub fn set_objects(&self) -> Result<Vec<Arc<dyn ConvexSet<f64>>>> {
        Ok(self
            .sets
            .iter()
            .map(SetSpec::build)
            .collect::<klcert::Result<_>>()?)
    }

    pub fn build(&self) -> Result<FeasibilityInstance<f64>> {
        let sets = self.set_objects()?;
        FeasibilityInstance::new(sets, self.xbar.clone(), self.radius, self.weights.clone())
            .context("inner ball check failed")
    }
}

impl Instance {
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serializes")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_json().as_bytes())
    }

    pub fn family(&self) -> &'static str {
        match self {
            Instance::Lasso(_) => "lasso",
            Instance::Feasibility(_) => "feasibility",
            Instance::UniformlyConvex(_) => "uniformly-convex",
        }
    }

    pub fn dim(&self) -> usize {
        self.x0().len()
    }

    pub fn x0(&self) -> &[f64] {
        match self {
            Instance::Lasso(d) => &d.x0,
            Instance::Feasibility(d) => &d.x0,
            Instance::UniformlyConvex(d) => &d.x0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use klcert::linalg::distance;

    #[test]
    fn feasibility_seed_7_contains_inner_ball() {
        let spec = FamilySpec::Feasibility {
            dim: 2,
            sets: 2,
            shapes: SetShapes::Disks,
            seed: 7,
        };
        let Instance::Feasibility(d) = generate(&spec, true).unwrap() else {
            panic!()
        };
        assert!(d.sets.iter().all(|s| matches!(s, SetSpec::Ball { .. })));
        for s in d.set_objects().unwrap() {
            // the farthest point of the inner ball from the set is inside it
            assert!(s.distance(&d.xbar) == 0.0);
        }
        if let SetSpec::Ball { center, radius } = &d.sets[0] {
            assert!(distance(center, &d.xbar) + d.radius <= *radius);
        }
        assert_eq!(generate(&spec, true).unwrap(), Instance::Feasibility(d));
    }

    #[test]
    fn lasso_reference_minimum_is_optimal() {
        let spec = FamilySpec::Lasso {
            m: 2,
            n: 2,
            mu: 0.4,
            seed: 3,
        };
        let Instance::Lasso(d) = generate(&spec, true).unwrap() else {
            panic!()
        };
        let inst = d.build().unwrap();
        // optimality: |A^T(Ax − y)|_i ≤ μ off the support, = −μ sign(x_i) on it
        let r: Vec<f64> = inst
            .a
            .mul_vec(&d.minimizer)
            .unwrap()
            .iter()
            .zip(&d.y)
            .map(|(u, v)| u - v)
            .collect();
        let g = inst.a.tr_mul_vec(&r).unwrap();
        for (xi, gi) in d.minimizer.iter().zip(&g) {
            if *xi == 0.0 {
                assert!(gi.abs() <= d.mu + 1e-9);
            } else {
                assert!((gi + d.mu * xi.signum()).abs() < 1e-9);
            }
        }
        assert!((inst.value(&d.minimizer) - d.min_value).abs() < 1e-15);
    }

    #[test]
    fn over_cap_suggests_sampling() {
        let spec = FamilySpec::Lasso {
            m: 4,
            n: 6,
            mu: 0.5,
            seed: 1,
        };
        let err = generate(&spec, true).unwrap_err().to_string();
        assert!(err.contains("sampled"), "{err}");
    }

    #[test]
    fn uniformly_convex_rejects_other_p() {
        let spec = FamilySpec::UniformlyConvex {
            dim: 2,
            sigma: 1.0,
            p: 4.0,
            seed: 0,
        };
        assert!(generate(&spec, true).is_err());
    }
}
