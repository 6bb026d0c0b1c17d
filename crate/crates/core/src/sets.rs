//! Closed convex sets with exact Euclidean projections.

use std::fmt::Debug;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{usage, Result};
use crate::linalg::{axpy, distance, dot, norm, scale, sub};
use crate::scalar::Real;

/// Boundary of a planar set, used by the exact two-dimensional projection
/// onto intersections.
#[derive(Debug, Clone, PartialEq)]
pub enum Boundary2d<T> {
    Circle {
        center: [T; 2],
        radius: T,
    },
    /// `{x : ⟨normal, x⟩ = offset}`
    Line {
        normal: [T; 2],
        offset: T,
    },
}

pub trait ConvexSet<T: Real>: Send + Sync + Debug {
    fn dim(&self) -> usize;

    fn project(&self, x: &[T]) -> Vec<T>;

    fn contains(&self, x: &[T], tol: T) -> bool;

    fn distance(&self, x: &[T]) -> T {
        distance(x, &self.project(x))
    }

    /// Projection of `v` onto the tangent cone of the set at `x ∈ C`.
    fn project_tangent(&self, x: &[T], v: &[T]) -> Vec<T>;

    fn boundary_2d(&self) -> Option<Boundary2d<T>> {
        None
    }

    fn spec(&self) -> SetSpec;
}

/// Serializable description of a shipped set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SetSpec {
    Ball { center: Vec<f64>, radius: f64 },
    HalfSpace { normal: Vec<f64>, offset: f64 },
    Box { lower: Vec<f64>, upper: Vec<f64> },
}

impl SetSpec {
    pub fn build<T: Real>(&self) -> Result<Arc<dyn ConvexSet<T>>> {
        let conv = |v: &[f64]| v.iter().map(|&x| T::lit(x)).collect::<Vec<T>>();
        Ok(match self {
            SetSpec::Ball { center, radius } => Arc::new(Ball::new(conv(center), T::lit(*radius))?),
            SetSpec::HalfSpace { normal, offset } => {
                Arc::new(HalfSpace::new(conv(normal), T::lit(*offset))?)
            }
            SetSpec::Box { lower, upper } => Arc::new(BoxSet::new(conv(lower), conv(upper))?),
        })
    }
}

fn boundary_tol<T: Real>(scale_hint: T) -> T {
    T::lit(1e-12) * (T::one() + scale_hint.abs())
}

/// Closed Euclidean ball `B(center, radius)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ball<T> {
    pub center: Vec<T>,
    pub radius: T,
}

impl<T: Real> Ball<T> {
    pub fn new(center: Vec<T>, radius: T) -> Result<Self> {
        if !(radius >= T::zero()) || center.is_empty() {
            return usage("ball needs a nonnegative radius and dimension >= 1");
        }
        Ok(Self { center, radius })
    }
}

impl<T: Real> ConvexSet<T> for Ball<T> {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn project(&self, x: &[T]) -> Vec<T> {
        let d = sub(x, &self.center);
        let r = norm(&d);
        if r <= self.radius {
            x.to_vec()
        } else {
            axpy(&self.center, self.radius / r, &d)
        }
    }

    fn contains(&self, x: &[T], tol: T) -> bool {
        distance(x, &self.center) <= self.radius + tol
    }

    fn project_tangent(&self, x: &[T], v: &[T]) -> Vec<T> {
        let d = sub(x, &self.center);
        let r = norm(&d);
        if r < self.radius - boundary_tol(self.radius) || r == T::zero() {
            return v.to_vec();
        }
        let n = scale(T::one() / r, &d);
        let s = dot(&n, v);
        if s > T::zero() {
            axpy(v, -s, &n)
        } else {
            v.to_vec()
        }
    }

    fn boundary_2d(&self) -> Option<Boundary2d<T>> {
        (self.center.len() == 2).then(|| Boundary2d::Circle {
            center: [self.center[0], self.center[1]],
            radius: self.radius,
        })
    }

    fn spec(&self) -> SetSpec {
        SetSpec::Ball {
            center: self.center.iter().map(|v| v.to_f64_lossy()).collect(),
            radius: self.radius.to_f64_lossy(),
        }
    }
}

/// Closed half-space `{x : ⟨normal, x⟩ ≤ offset}`.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfSpace<T> {
    pub normal: Vec<T>,
    pub offset: T,
}

impl<T: Real> HalfSpace<T> {
    pub fn new(normal: Vec<T>, offset: T) -> Result<Self> {
        if normal.is_empty() || norm(&normal) == T::zero() {
            return usage("half-space normal must be nonzero");
        }
        Ok(Self { normal, offset })
    }

    fn unit_normal(&self) -> (Vec<T>, T) {
        let nn = norm(&self.normal);
        (scale(T::one() / nn, &self.normal), self.offset / nn)
    }
}

impl<T: Real> ConvexSet<T> for HalfSpace<T> {
    fn dim(&self) -> usize {
        self.normal.len()
    }

    fn project(&self, x: &[T]) -> Vec<T> {
        let (n, b) = self.unit_normal();
        let viol = dot(&n, x) - b;
        if viol <= T::zero() {
            x.to_vec()
        } else {
            axpy(x, -viol, &n)
        }
    }

    fn contains(&self, x: &[T], tol: T) -> bool {
        let (n, b) = self.unit_normal();
        dot(&n, x) - b <= tol
    }

    fn project_tangent(&self, x: &[T], v: &[T]) -> Vec<T> {
        let (n, b) = self.unit_normal();
        if dot(&n, x) - b < -boundary_tol(b) {
            return v.to_vec();
        }
        let s = dot(&n, v);
        if s > T::zero() {
            axpy(v, -s, &n)
        } else {
            v.to_vec()
        }
    }

    fn boundary_2d(&self) -> Option<Boundary2d<T>> {
        if self.normal.len() != 2 {
            return None;
        }
        let (n, b) = self.unit_normal();
        Some(Boundary2d::Line {
            normal: [n[0], n[1]],
            offset: b,
        })
    }

    fn spec(&self) -> SetSpec {
        SetSpec::HalfSpace {
            normal: self.normal.iter().map(|v| v.to_f64_lossy()).collect(),
            offset: self.offset.to_f64_lossy(),
        }
    }
}

/// Axis-aligned box `[lower, upper]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxSet<T> {
    pub lower: Vec<T>,
    pub upper: Vec<T>,
}

impl<T: Real> BoxSet<T> {
    pub fn new(lower: Vec<T>, upper: Vec<T>) -> Result<Self> {
        if lower.len() != upper.len()
            || lower.is_empty()
            || lower.iter().zip(&upper).any(|(l, u)| !(l <= u))
        {
            return usage("box needs lower <= upper of equal dimension");
        }
        Ok(Self { lower, upper })
    }
}

impl<T: Real> ConvexSet<T> for BoxSet<T> {
    fn dim(&self) -> usize {
        self.lower.len()
    }

    fn project(&self, x: &[T]) -> Vec<T> {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(&v, (&l, &u))| v.max(l).min(u))
            .collect()
    }

    fn contains(&self, x: &[T], tol: T) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(&v, (&l, &u))| v >= l - tol && v <= u + tol)
    }

    fn project_tangent(&self, x: &[T], v: &[T]) -> Vec<T> {
        x.iter()
            .zip(v)
            .zip(self.lower.iter().zip(&self.upper))
            .map(|((&xi, &vi), (&l, &u))| {
                let mut w = vi;
                if xi >= u - boundary_tol(u) {
                    w = w.min(T::zero());
                }
                if xi <= l + boundary_tol(l) {
                    w = w.max(T::zero());
                }
                w
            })
            .collect()
    }

    fn spec(&self) -> SetSpec {
        SetSpec::Box {
            lower: self.lower.iter().map(|v| v.to_f64_lossy()).collect(),
            upper: self.upper.iter().map(|v| v.to_f64_lossy()).collect(),
        }
    }
}

/// Projection onto `∩ Cᵢ` by Dykstra's algorithm.
///
/// Returns the last iterate after the cyclic sweep in which the iterate moved
/// less than `tol`. Converges to the exact projection for closed convex sets
/// with nonempty intersection.
pub fn project_intersection<T: Real>(
    sets: &[Arc<dyn ConvexSet<T>>],
    x: &[T],
    tol: T,
    max_sweeps: usize,
) -> Vec<T> {
    let m = sets.len();
    let mut z = x.to_vec();
    let mut incr = vec![vec![T::zero(); x.len()]; m];
    for _ in 0..max_sweeps {
        let mut moved = T::zero();
        for (set, p) in sets.iter().zip(incr.iter_mut()) {
            let shifted: Vec<T> = z.iter().zip(p.iter()).map(|(&a, &b)| a + b).collect();
            let next = set.project(&shifted);
            *p = sub(&shifted, &next);
            moved = moved.max(distance(&next, &z));
            z = next;
        }
        if moved <= tol {
            break;
        }
    }
    z
}

fn circle_line<T: Real>(c: [T; 2], r: T, n: [T; 2], b: T) -> Vec<[T; 2]> {
    // n is unit
    let s = n[0] * c[0] + n[1] * c[1] - b;
    let foot = [c[0] - s * n[0], c[1] - s * n[1]];
    let h2 = r * r - s * s;
    if h2 < T::zero() {
        return vec![];
    }
    let h = h2.sqrt();
    let t = [-n[1], n[0]];
    vec![
        [foot[0] + h * t[0], foot[1] + h * t[1]],
        [foot[0] - h * t[0], foot[1] - h * t[1]],
    ]
}

fn boundary_intersections<T: Real>(a: &Boundary2d<T>, b: &Boundary2d<T>) -> Vec<[T; 2]> {
    match (a, b) {
        (
            Boundary2d::Line {
                normal: n1,
                offset: b1,
            },
            Boundary2d::Line {
                normal: n2,
                offset: b2,
            },
        ) => {
            let det = n1[0] * n2[1] - n1[1] * n2[0];
            if det.abs() <= T::epsilon() {
                return vec![];
            }
            vec![[
                (*b1 * n2[1] - n1[1] * *b2) / det,
                (n1[0] * *b2 - *b1 * n2[0]) / det,
            ]]
        }
        (Boundary2d::Circle { center, radius }, Boundary2d::Line { normal, offset })
        | (Boundary2d::Line { normal, offset }, Boundary2d::Circle { center, radius }) => {
            circle_line(*center, *radius, *normal, *offset)
        }
        (
            Boundary2d::Circle {
                center: c1,
                radius: r1,
            },
            Boundary2d::Circle {
                center: c2,
                radius: r2,
            },
        ) => {
            // radical line: 2(c2-c1)·x = r1² - r2² + |c2|² - |c1|²
            let n = [T::two() * (c2[0] - c1[0]), T::two() * (c2[1] - c1[1])];
            let nn = (n[0] * n[0] + n[1] * n[1]).sqrt();
            if nn <= T::epsilon() {
                return vec![];
            }
            let rhs = *r1 * *r1 - *r2 * *r2 + c2[0] * c2[0] + c2[1] * c2[1]
                - c1[0] * c1[0]
                - c1[1] * c1[1];
            circle_line(*c1, *r1, [n[0] / nn, n[1] / nn], rhs / nn)
        }
    }
}

/// Exact projection onto an intersection of planar balls and half-spaces.
///
/// The projection has at most two active constraints, so it is the nearest
/// feasible point among `x`, the single-set projections and the pairwise
/// boundary intersection points. Returns `None` if a set has no planar
/// boundary description or no candidate is feasible.
pub fn project_intersection_2d<T: Real>(sets: &[Arc<dyn ConvexSet<T>>], x: &[T]) -> Option<Vec<T>> {
    if x.len() != 2 {
        return None;
    }
    let bounds: Vec<Boundary2d<T>> = sets
        .iter()
        .map(|s| s.boundary_2d())
        .collect::<Option<_>>()?;
    let mut candidates: Vec<Vec<T>> = vec![x.to_vec()];
    candidates.extend(sets.iter().map(|s| s.project(x)));
    for i in 0..bounds.len() {
        for j in (i + 1)..bounds.len() {
            candidates.extend(
                boundary_intersections(&bounds[i], &bounds[j])
                    .into_iter()
                    .map(|p| p.to_vec()),
            );
        }
    }
    let tol = T::lit(1e-10) * (T::one() + crate::linalg::norm(x));
    candidates
        .into_iter()
        .filter(|c| sets.iter().all(|s| s.contains(c, tol)))
        .min_by(|a, b| distance(a, x).partial_cmp(&distance(b, x)).expect("finite"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disk(cx: f64, cy: f64, r: f64) -> Arc<dyn ConvexSet<f64>> {
        Arc::new(Ball::new(vec![cx, cy], r).unwrap())
    }

    #[test]
    fn projections_land_in_set_and_are_idempotent() {
        let b = Ball::<f64>::new(vec![0.0, 0.0], 1.0).unwrap();
        let p = b.project(&[3.0, 4.0]);
        assert!((p[0] - 0.6).abs() < 1e-15 && (p[1] - 0.8).abs() < 1e-15);
        assert_eq!(b.project(&p), p);
        let h = HalfSpace::<f64>::new(vec![0.0, 2.0], 2.0).unwrap();
        assert_eq!(h.project(&[5.0, 3.0]), vec![5.0, 1.0]);
        assert!((h.distance(&[5.0, 3.0]) - 2.0).abs() < 1e-15);
        let bx = BoxSet::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
        assert_eq!(bx.project(&[2.0, -0.5]), vec![1.0, -0.5]);
    }

    #[test]
    fn tangent_projection_clips_outward_component() {
        let h = HalfSpace::new(vec![1.0, 0.0], 0.0).unwrap();
        assert_eq!(h.project_tangent(&[0.0, 0.0], &[2.0, 1.0]), vec![0.0, 1.0]);
        assert_eq!(
            h.project_tangent(&[0.0, 0.0], &[-2.0, 1.0]),
            vec![-2.0, 1.0]
        );
        assert_eq!(h.project_tangent(&[-1.0, 0.0], &[2.0, 1.0]), vec![2.0, 1.0]);
    }

    #[test]
    fn exact_2d_projection_agrees_with_dykstra() {
        let sets = vec![disk(0.0, 0.0, 2.0), disk(1.5, 0.0, 2.0)];
        let hs: Arc<dyn ConvexSet<f64>> = Arc::new(HalfSpace::new(vec![0.3, 1.0], 0.5).unwrap());
        let triple = vec![sets[0].clone(), sets[1].clone(), hs];
        for x in [
            [0.7, 3.0],
            [-3.0, 0.2],
            [5.0, -1.0],
            [0.5, 0.1],
            [0.75, -4.0],
        ] {
            for family in [&sets, &triple] {
                let exact = project_intersection_2d(family, &x).unwrap();
                let dyk = project_intersection(family, &x, 1e-15, 200_000);
                assert!(distance(&exact, &dyk) < 1e-7, "{x:?}: {exact:?} vs {dyk:?}");
            }
        }
    }
}
