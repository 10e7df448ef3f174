//! Linear knot constraints and the Euclidean projection onto them.
//!
//! Each knot vector is constrained on its own: ordered knots with a minimal
//! gap, plus bounds that keep every basis function inside (or touching) the
//! domain. Shifting knot `i` by `i * h_min` turns the gap chain into a
//! monotonicity constraint, so the projection is a bounded isotonic
//! regression solved by pool-adjacent-violators.

use crate::error::{Error, Result};
use crate::space::{BoundaryMode, MultiPatchSpace};

/// Default minimal knot gap.
pub const DEFAULT_H_MIN: f64 = 1e-6;

/// Constraints on one knot vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainConstraints {
    pub patch: usize,
    pub axis: usize,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// `Some(value)` for knots that may not move.
    pub fixed: Vec<Option<f64>>,
    pub h_min: f64,
}

/// The feasible knot set of a space.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibleSet {
    pub chains: Vec<ChainConstraints>,
}

impl FeasibleSet {
    /// Constraints for `space` according to its boundary mode.
    pub fn from_space(space: &MultiPatchSpace, h_min: f64) -> Self {
        let mut chains = Vec::new();
        for (s, patch) in space.patches().iter().enumerate() {
            for t in 0..patch.dim() {
                let knots = patch.knots(t).as_slice();
                let mut c = ChainConstraints::for_chain(knots.len(), patch.degree(t), space.domain()[t], space.mode(), h_min);
                c.patch = s;
                c.axis = t;
                c.fixed = knots
                    .iter()
                    .zip(patch.trainable(t))
                    .map(|(&k, &free)| (!free).then_some(k))
                    .collect();
                chains.push(c);
            }
        }
        Self { chains }
    }

    /// Projects the trainable knot vector `xi` onto the feasible set.
    pub fn project(&self, xi: &[f64]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(xi.len());
        let mut it = xi.iter();
        for c in &self.chains {
            let cand: Vec<f64> = c
                .fixed
                .iter()
                .map(|f| match f {
                    Some(v) => Ok(*v),
                    None => it.next().copied().ok_or(Error::DimensionMismatch {
                        expected: xi.len() + 1,
                        found: xi.len(),
                    }),
                })
                .collect::<Result<_>>()?;
            let proj = c.project(&cand)?;
            for (v, f) in proj.iter().zip(&c.fixed) {
                if f.is_none() {
                    out.push(*v);
                }
            }
        }
        if it.next().is_some() {
            return Err(Error::DimensionMismatch {
                expected: out.len(),
                found: xi.len(),
            });
        }
        Ok(out)
    }

    /// Largest constraint violation of `xi` (zero when feasible).
    pub fn violation(&self, xi: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        let mut it = xi.iter();
        for c in &self.chains {
            let v: Vec<f64> = c
                .fixed
                .iter()
                .map(|f| f.unwrap_or_else(|| *it.next().unwrap_or(&f64::NAN)))
                .collect();
            worst = worst.max(c.violation(&v));
        }
        worst
    }
}

impl ChainConstraints {
    /// Bounds for an all-free knot vector of length `n` and degree `p` on `domain`.
    pub fn for_chain(n: usize, p: usize, domain: (f64, f64), mode: BoundaryMode, h_min: f64) -> Self {
        let (a, b) = domain;
        let mut lower = vec![f64::NEG_INFINITY; n];
        let mut upper = vec![f64::INFINITY; n];
        match mode {
            BoundaryMode::Free => {
                let w = b - a;
                lower[0] = lower[0].max(a - w);
                upper[n - 1] = upper[n - 1].min(b + w);
                if p < n {
                    lower[p] = lower[p].max(a);
                    upper[n - 1 - p] = upper[n - 1 - p].min(b);
                }
            }
            BoundaryMode::ZeroTrace => {
                lower[0] = a;
                upper[n - 1] = b;
            }
        }
        ChainConstraints {
            patch: 0,
            axis: 0,
            lower,
            upper,
            fixed: vec![None; n],
            h_min,
        }
    }

    /// Largest violation for a full knot vector.
    pub fn violation(&self, v: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..v.len() {
            if !v[i].is_finite() {
                return f64::INFINITY;
            }
            worst = worst.max(self.lower[i] - v[i]).max(v[i] - self.upper[i]);
            if let Some(f) = self.fixed[i] {
                worst = worst.max((v[i] - f).abs());
            }
            if i + 1 < v.len() && !(self.fixed[i].is_some() && self.fixed[i + 1].is_some()) {
                worst = worst.max(v[i] + self.h_min - v[i + 1]);
            }
        }
        worst
    }

    /// Closest feasible vector to `cand`; fixed entries are reset to their values.
    pub fn project(&self, cand: &[f64]) -> Result<Vec<f64>> {
        let n = cand.len();
        let h = self.h_min;
        let mut out = cand.to_vec();
        let mut i = 0;
        while i < n {
            if let Some(f) = self.fixed[i] {
                out[i] = f;
                i += 1;
                continue;
            }
            let a = i;
            while i < n && self.fixed[i].is_none() {
                i += 1;
            }
            let b = i; // exclusive
            let mut lo: Vec<f64> = (a..b).map(|j| self.lower[j] - (j - a) as f64 * h).collect();
            let mut hi: Vec<f64> = (a..b).map(|j| self.upper[j] - (j - a) as f64 * h).collect();
            if a > 0 {
                if let Some(f) = self.fixed[a - 1] {
                    lo[0] = lo[0].max(f + h);
                }
            }
            if b < n {
                if let Some(f) = self.fixed[b] {
                    let last = b - 1 - a;
                    hi[last] = hi[last].min(f - h - last as f64 * h);
                }
            }
            let c: Vec<f64> = (a..b).map(|j| cand[j] - (j - a) as f64 * h).collect();
            let sigma = bounded_isotonic(&c, &lo, &hi).map_err(|e| match e {
                Error::Infeasible(m) => Error::Infeasible(format!(
                    "patch {} axis {}: {m}",
                    self.patch, self.axis
                )),
                e => e,
            })?;
            for (k, j) in (a..b).enumerate() {
                // Untouched entries are copied to avoid shift round-off.
                out[j] = if sigma[k] == c[k] { cand[j] } else { sigma[k] + k as f64 * h };
            }
        }
        Ok(out)
    }
}

/// Minimises `sum (x_i - c_i)^2` over non-decreasing `x` with `lo <= x <= hi`.
pub fn bounded_isotonic(c: &[f64], lo: &[f64], hi: &[f64]) -> Result<Vec<f64>> {
    let n = c.len();
    // monotone envelopes describe the same feasible set
    let mut l = lo.to_vec();
    for i in 1..n {
        l[i] = l[i].max(l[i - 1]);
    }
    let mut u = hi.to_vec();
    for i in (0..n.saturating_sub(1)).rev() {
        u[i] = u[i].min(u[i + 1]);
    }
    for i in 0..n {
        if l[i] > u[i] {
            return Err(Error::Infeasible(format!(
                "knot {i} needs {} <= x <= {}",
                l[i], u[i]
            )));
        }
    }
    // blocks: (start, len, sum, value)
    let mut blocks: Vec<(usize, usize, f64, f64)> = Vec::with_capacity(n);
    let value = |start: usize, len: usize, sum: f64| (sum / len as f64).clamp(l[start + len - 1], u[start]);
    for i in 0..n {
        blocks.push((i, 1, c[i], value(i, 1, c[i])));
        while blocks.len() >= 2 {
            let m = blocks.len();
            if blocks[m - 2].3 <= blocks[m - 1].3 {
                break;
            }
            let (s2, n2, sum2, _) = blocks.pop().expect("len >= 2");
            let (s1, n1, sum1, _) = blocks.pop().expect("len >= 2");
            let _ = s2;
            let (len, sum) = (n1 + n2, sum1 + sum2);
            blocks.push((s1, len, sum, value(s1, len, sum)));
        }
    }
    let mut x = vec![0.0; n];
    for (s, len, _, v) in blocks {
        x[s..s + len].iter_mut().for_each(|e| *e = v);
    }
    Ok(x)
}
