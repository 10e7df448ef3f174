//! Immutable knot vectors and the elementary operations on them.

use crate::error::{Error, Result};

/// A finite, non-decreasing sequence of reals.
///
/// Equality is exact float equality.
#[derive(Debug, Clone, PartialEq)]
pub struct KnotVector(Vec<f64>);

impl KnotVector {
    /// Validates and wraps `knots`. At least two entries are required.
    pub fn new(knots: Vec<f64>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::InvalidArity {
                len: knots.len(),
                min: 2,
            });
        }
        for (i, k) in knots.iter().enumerate() {
            if !k.is_finite() {
                return Err(Error::NonFinite { index: i });
            }
        }
        for i in 1..knots.len() {
            if knots[i] < knots[i - 1] {
                return Err(Error::Unsorted { index: i });
            }
        }
        Ok(Self(knots))
    }

    /// Evenly spaced knots from `a` to `b` inclusive.
    pub fn uniform(a: f64, b: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArity { len: n, min: 2 });
        }
        let h = (b - a) / (n - 1) as f64;
        let mut v: Vec<f64> = (0..n).map(|i| a + i as f64 * h).collect();
        v[n - 1] = b;
        Self::new(v)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn first(&self) -> f64 {
        self.0[0]
    }

    pub fn last(&self) -> f64 {
        self.0[self.0.len() - 1]
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Removes the first knot.
    pub fn drop_first(&self) -> Result<Self> {
        if self.len() < 3 {
            return Err(Error::InvalidArity {
                len: self.len(),
                min: 3,
            });
        }
        Ok(Self(self.0[1..].to_vec()))
    }

    /// Removes the last knot.
    pub fn drop_last(&self) -> Result<Self> {
        if self.len() < 3 {
            return Err(Error::InvalidArity {
                len: self.len(),
                min: 3,
            });
        }
        Ok(Self(self.0[..self.len() - 1].to_vec()))
    }

    /// Inserts `x` at its sorted position. `x` must lie in `[first, last]`.
    pub fn insert(&self, x: f64) -> Result<Self> {
        if !(x >= self.first() && x <= self.last()) {
            return Err(Error::OutOfRange {
                x,
                lo: self.first(),
                hi: self.last(),
            });
        }
        Ok(Self(insert_sorted(&self.0, x)))
    }

    /// `last - first`.
    pub fn width(&self) -> f64 {
        self.last() - self.first()
    }

    /// Smallest gap between consecutive knots.
    pub fn min_mesh_size(&self) -> f64 {
        min_gap(&self.0)
    }
}

impl std::ops::Index<usize> for KnotVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Smallest consecutive gap over several knot vectors.
pub fn joint_min_mesh_size(vectors: &[&KnotVector]) -> f64 {
    vectors
        .iter()
        .map(|v| v.min_mesh_size())
        .fold(f64::INFINITY, f64::min)
}

pub(crate) fn min_gap(knots: &[f64]) -> f64 {
    knots
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min)
}

pub(crate) fn insert_sorted(knots: &[f64], x: f64) -> Vec<f64> {
    let pos = knots.partition_point(|&k| k <= x);
    let mut v = Vec::with_capacity(knots.len() + 1);
    v.extend_from_slice(&knots[..pos]);
    v.push(x);
    v.extend_from_slice(&knots[pos..]);
    v
}
