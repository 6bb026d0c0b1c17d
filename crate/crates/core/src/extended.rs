//! Extended reals `ℝ ∪ {+∞}` as an explicit tagged value.

use std::cmp::Ordering;
use std::fmt;

use crate::scalar::Real;

/// A value in `ℝ ∪ {+∞}`. Infinity is never stored as an IEEE infinity so
/// `f(x) - min f` cannot silently turn into `NaN`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Extended<T> {
    Finite(T),
    PosInfinity,
}

impl<T: Real> Extended<T> {
    pub fn finite(self) -> Option<T> {
        match self {
            Extended::Finite(v) => Some(v),
            Extended::PosInfinity => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Extended::Finite(_))
    }

    /// Sum of two extended values; `+∞` absorbs.
    pub fn add(self, other: Self) -> Self {
        match (self, other) {
            (Extended::Finite(a), Extended::Finite(b)) => Extended::Finite(a + b),
            _ => Extended::PosInfinity,
        }
    }

    /// `self - shift` where `shift` is finite.
    pub fn shifted(self, shift: T) -> Self {
        match self {
            Extended::Finite(a) => Extended::Finite(a - shift),
            Extended::PosInfinity => Extended::PosInfinity,
        }
    }

    /// Lossy conversion for reporting: `+∞` becomes `f64::INFINITY`.
    pub fn to_f64(self) -> f64 {
        match self {
            Extended::Finite(v) => v.to_f64_lossy(),
            Extended::PosInfinity => f64::INFINITY,
        }
    }
}

impl<T: Real> From<T> for Extended<T> {
    fn from(v: T) -> Self {
        Extended::Finite(v)
    }
}

impl<T: Real> PartialOrd for Extended<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (Extended::Finite(a), Extended::Finite(b)) => a.partial_cmp(b),
            (Extended::Finite(_), Extended::PosInfinity) => Some(Ordering::Less),
            (Extended::PosInfinity, Extended::Finite(_)) => Some(Ordering::Greater),
            (Extended::PosInfinity, Extended::PosInfinity) => Some(Ordering::Equal),
        }
    }
}

impl<T: Real> fmt::Display for Extended<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Extended::Finite(v) => write!(f, "{v}"),
            Extended::PosInfinity => write!(f, "+inf"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn infinity_absorbs_and_orders_last() {
        let a = Extended::Finite(1.0_f64);
        assert_eq!(a.add(Extended::PosInfinity), Extended::PosInfinity);
        assert!(a < Extended::PosInfinity);
        assert_eq!(a.shifted(1.0), Extended::Finite(0.0));
        assert_eq!(
            Extended::<f64>::PosInfinity.shifted(3.0),
            Extended::PosInfinity
        );
        assert_eq!(Extended::<f64>::PosInfinity.to_f64(), f64::INFINITY);
    }
}
