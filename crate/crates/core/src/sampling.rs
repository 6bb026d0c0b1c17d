//! Seeded uniform samplers over certificate regions.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};

use crate::desingularization::Region;
use crate::error::{usage, Result};
use crate::scalar::Real;
use crate::sets::ConvexSet;

#[derive(Debug, Clone, PartialEq)]
pub enum SamplerShape {
    /// Uniform in `{‖x‖₁ ≤ radius}`.
    L1Ball {
        dim: usize,
        radius: f64,
    },
    /// Uniform in `B(center, radius)`.
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    /// Uniform on the sphere `∂B(center, radius)`.
    Sphere {
        center: Vec<f64>,
        radius: f64,
    },
    Box {
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
}

/// Deterministic sampler: identical `(shape, seed)` give identical streams.
#[derive(Debug, Clone)]
pub struct RegionSampler {
    shape: SamplerShape,
    rng: ChaCha8Rng,
    domain: Option<Arc<dyn ConvexSet<f64>>>,
}

impl RegionSampler {
    pub fn new(shape: SamplerShape, seed: u64) -> Result<Self> {
        let ok = match &shape {
            SamplerShape::L1Ball { dim, radius } => *dim > 0 && *radius >= 0.0,
            SamplerShape::Ball { center, radius } | SamplerShape::Sphere { center, radius } => {
                !center.is_empty() && *radius >= 0.0
            }
            SamplerShape::Box { lower, upper } => {
                !lower.is_empty()
                    && lower.len() == upper.len()
                    && lower.iter().zip(upper).all(|(l, u)| l <= u)
            }
        };
        if !ok {
            return usage(format!("degenerate sampler shape {shape:?}"));
        }
        Ok(Self {
            shape,
            rng: ChaCha8Rng::seed_from_u64(seed),
            domain: None,
        })
    }

    /// Projects every draw onto `set`. For a ball whose centre lies in `set`
    /// the projected draws stay in the ball, since projection does not move
    /// points away from members of the set.
    pub fn with_domain(mut self, set: Arc<dyn ConvexSet<f64>>) -> Self {
        self.domain = Some(set);
        self
    }

    /// Sampler matching a certificate region; `Everywhere` needs a fallback box
    /// given by `dim` and `half_width` around the origin.
    pub fn for_region(region: &Region, dim: usize, half_width: f64, seed: u64) -> Result<Self> {
        let shape = match region {
            Region::Everywhere => SamplerShape::Box {
                lower: vec![-half_width; dim],
                upper: vec![half_width; dim],
            },
            Region::L1Ball { radius } => SamplerShape::L1Ball {
                dim,
                radius: *radius,
            },
            Region::Ball { center, radius } => SamplerShape::Ball {
                center: center.clone(),
                radius: *radius,
            },
        };
        Self::new(shape, seed)
    }

    pub fn dim(&self) -> usize {
        match &self.shape {
            SamplerShape::L1Ball { dim, .. } => *dim,
            SamplerShape::Ball { center, .. } | SamplerShape::Sphere { center, .. } => center.len(),
            SamplerShape::Box { lower, .. } => lower.len(),
        }
    }

    fn direction(&mut self, n: usize) -> Vec<f64> {
        loop {
            let g: Vec<f64> = (0..n).map(|_| self.rng.sample(StandardNormal)).collect();
            let len = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            if len > 1e-300 {
                return g.into_iter().map(|v| v / len).collect();
            }
        }
    }

    pub fn sample_f64(&mut self) -> Vec<f64> {
        let x = self.draw();
        match &self.domain {
            Some(set) => set.project(&x),
            None => x,
        }
    }

    fn draw(&mut self) -> Vec<f64> {
        match self.shape.clone() {
            SamplerShape::L1Ball { dim, radius } => {
                // E₁..E_n / (E₁ + … + E_{n+1}) is uniform on the solid simplex
                let e: Vec<f64> = (0..=dim).map(|_| self.rng.sample::<f64, _>(Exp1)).collect();
                let total: f64 = e.iter().sum();
                e[..dim]
                    .iter()
                    .map(|&v| {
                        let sign = if self.rng.random::<bool>() { 1.0 } else { -1.0 };
                        sign * radius * v / total
                    })
                    .collect()
            }
            SamplerShape::Ball { center, radius } => {
                let n = center.len();
                let u: f64 = self.rng.random();
                let r = radius * u.powf(1.0 / n as f64);
                self.direction(n)
                    .iter()
                    .zip(&center)
                    .map(|(d, c)| c + r * d)
                    .collect()
            }
            SamplerShape::Sphere { center, radius } => {
                let n = center.len();
                self.direction(n)
                    .iter()
                    .zip(&center)
                    .map(|(d, c)| c + radius * d)
                    .collect()
            }
            SamplerShape::Box { lower, upper } => lower
                .iter()
                .zip(&upper)
                .map(|(&l, &u)| l + (u - l) * self.rng.random::<f64>())
                .collect(),
        }
    }

    pub fn sample<T: Real>(&mut self) -> Vec<T> {
        self.sample_f64().into_iter().map(T::lit).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn domain_projection_keeps_ball_samples_inside() {
        use crate::sets::HalfSpace;
        let center = vec![0.5, -0.25];
        let set: Arc<dyn ConvexSet<f64>> = Arc::new(HalfSpace::new(vec![1.0, 0.0], 1.0).unwrap());
        let mut s = RegionSampler::new(
            SamplerShape::Ball {
                center: center.clone(),
                radius: 3.0,
            },
            9,
        )
        .unwrap()
        .with_domain(set.clone());
        for _ in 0..1000 {
            let x = s.sample_f64();
            assert!(set.contains(&x, 1e-12));
            assert!(crate::linalg::distance(&x, &center) <= 3.0 + 1e-12);
        }
    }

    #[test]
    fn samples_stay_in_shape_and_are_reproducible() {
        let mut a = RegionSampler::new(
            SamplerShape::L1Ball {
                dim: 3,
                radius: 2.0,
            },
            5,
        )
        .unwrap();
        let mut b = RegionSampler::new(
            SamplerShape::L1Ball {
                dim: 3,
                radius: 2.0,
            },
            5,
        )
        .unwrap();
        for _ in 0..1000 {
            let x = a.sample_f64();
            assert_eq!(x, b.sample_f64());
            assert!(x.iter().map(|v| v.abs()).sum::<f64>() <= 2.0);
        }
        let mut s = RegionSampler::new(
            SamplerShape::Sphere {
                center: vec![1.0, 1.0],
                radius: 0.5,
            },
            1,
        )
        .unwrap();
        for _ in 0..100 {
            let x = s.sample_f64();
            assert!((((x[0] - 1.0).powi(2) + (x[1] - 1.0).powi(2)).sqrt() - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn l1_ball_sampler_is_roughly_uniform() {
        // in 2-D the inner diamond of radius r/2 carries a quarter of the mass
        let mut s = RegionSampler::new(
            SamplerShape::L1Ball {
                dim: 2,
                radius: 1.0,
            },
            11,
        )
        .unwrap();
        let n = 20_000;
        let inner = (0..n)
            .filter(|_| s.sample_f64().iter().map(|v| v.abs()).sum::<f64>() <= 0.5)
            .count();
        let frac = inner as f64 / n as f64;
        assert!((frac - 0.25).abs() < 0.02, "{frac}");
    }

    #[test]
    fn degenerate_shapes_rejected() {
        assert!(RegionSampler::new(
            SamplerShape::Box {
                lower: vec![1.0],
                upper: vec![0.0]
            },
            0
        )
        .is_err());
        assert!(RegionSampler::new(
            SamplerShape::L1Ball {
                dim: 0,
                radius: 1.0
            },
            0
        )
        .is_err());
    }
}
