//! B-spline functors on local knot vectors and their spatial and knot derivatives.
//!
//! Cells are half-open `[t_c, t_{c+1})`. Whole-patch evaluation closes the last
//! non-empty cell at the right end so that the basis sums to one there.

use crate::error::{Error, Result};
use crate::knots::KnotVector;

/// Largest supported degree.
pub const MAX_DEGREE: usize = 10;
const MB: usize = MAX_DEGREE + 2;

/// Per-order tables of the basis functions that are non-zero on one cell.
pub type SpanTable = [[f64; MB]; MB];

/// Index `c` with `t_c <= x < t_{c+1}`.
pub fn cell_containing(knots: &[f64], x: f64) -> Option<usize> {
    if knots.len() < 2 || !(x >= knots[0]) || !(x < knots[knots.len() - 1]) {
        return None;
    }
    let c = knots.partition_point(|&k| k <= x) - 1;
    Some(c)
}

/// Index `c` with `t_c < x <= t_{c+1}`: the cell whose piece gives the left limit at `x`.
pub fn cell_left_of(knots: &[f64], x: f64) -> Option<usize> {
    if knots.len() < 2 || !(x > knots[0]) || !(x <= knots[knots.len() - 1]) {
        return None;
    }
    let c = knots.partition_point(|&k| k < x) - 1;
    Some(c)
}

/// Cell used for whole-patch evaluation: half-open, with the last non-empty
/// cell closed at the right end.
pub fn patch_cell(knots: &[f64], x: f64) -> Option<usize> {
    let n = knots.len();
    if n >= 2 && x == knots[n - 1] {
        return cell_left_of(knots, x);
    }
    cell_containing(knots, x)
}

/// Derivatives up to `kmax` of the degree-`p` basis functions on cell `c`,
/// using that cell's polynomial piece (also off the cell).
///
/// `out[k][a]` holds `D^k B_{c-p+a, p}(x)`. Functions whose knots fall outside
/// `knots` are zero. Vanishing denominators contribute zero.
pub fn span_ders(knots: &[f64], p: usize, c: usize, x: f64, kmax: usize) -> SpanTable {
    assert!(p <= MAX_DEGREE, "degree {p} exceeds MAX_DEGREE");
    let n = knots.len() as isize;
    let c = c as isize;
    let exists = |i: isize, r: usize| i >= 0 && i + r as isize + 1 < n;
    let t = |j: isize| knots[j as usize];
    // vals[r][a] = B_{c-r+a, r}(x)
    let mut vals = [[0.0; MB]; MB];
    if exists(c, 0) {
        vals[0][0] = 1.0;
    }
    for r in 1..=p {
        for a in 0..=r {
            let i = c - r as isize + a as isize;
            if !exists(i, r) {
                continue;
            }
            let mut v = 0.0;
            if a >= 1 {
                let den = t(i + r as isize) - t(i);
                if den > 0.0 {
                    v += (x - t(i)) / den * vals[r - 1][a - 1];
                }
            }
            if a < r {
                let den = t(i + r as isize + 1) - t(i + 1);
                if den > 0.0 {
                    v += (t(i + r as isize + 1) - x) / den * vals[r - 1][a];
                }
            }
            vals[r][a] = v;
        }
    }
    let mut out = [[0.0; MB]; MB];
    out[0] = vals[p];
    let kmax = kmax.min(p);
    let mut prev = vals;
    for k in 1..=kmax {
        let mut cur = [[0.0; MB]; MB];
        for r in k..=p {
            for a in 0..=r {
                let i = c - r as isize + a as isize;
                if !exists(i, r) {
                    continue;
                }
                let mut v = 0.0;
                if a >= 1 {
                    let den = t(i + r as isize) - t(i);
                    if den > 0.0 {
                        v += prev[r - 1][a - 1] / den;
                    }
                }
                if a < r {
                    let den = t(i + r as isize + 1) - t(i + 1);
                    if den > 0.0 {
                        v -= prev[r - 1][a] / den;
                    }
                }
                cur[r][a] = r as f64 * v;
            }
        }
        out[k] = cur[p];
        prev = cur;
    }
    out
}

/// `D^k B_p(window)(x)` using the piece of cell `cell`; `p = window.len() - 2`.
pub fn window_piece(window: &[f64], k: usize, x: f64, cell: usize) -> f64 {
    let p = window.len() - 2;
    if k > p {
        return 0.0;
    }
    span_ders(window, p, cell, x, k)[k][p - cell]
}

/// `D^k B_p(window)(x)` with half-open cells; zero outside the support.
pub fn window_value(window: &[f64], k: usize, x: f64) -> f64 {
    match cell_containing(window, x) {
        Some(c) => window_piece(window, k, x, c),
        None => 0.0,
    }
}

/// `D^k B_p(window)` evaluated at `x` with the piece selected by the reference point `y`.
pub fn window_piece_at(window: &[f64], k: usize, x: f64, y: f64) -> f64 {
    match cell_containing(window, y) {
        Some(c) => window_piece(window, k, x, c),
        None => 0.0,
    }
}

/// Left and right limits of `D^k B_p(window)` at `g`.
pub fn window_limits(window: &[f64], k: usize, g: f64) -> (f64, f64) {
    let left = cell_left_of(window, g).map_or(0.0, |c| window_piece(window, k, g, c));
    let right = cell_containing(window, g).map_or(0.0, |c| window_piece(window, k, g, c));
    (left, right)
}

fn normalised_piece_at(window: &[f64], k: usize, x: f64, y: f64) -> f64 {
    let w = window[window.len() - 1] - window[0];
    if w > 0.0 {
        window_piece_at(window, k, x, y) / w
    } else {
        0.0
    }
}

/// Regular part of `d/dt_i D^k B_p(window)` at `x`, with pieces selected by `y`.
///
/// `i` is 0-based. Dirac contributions from coinciding knots are dropped; the
/// assembly routines add them back as jump terms.
pub fn dknot_piece_at(window: &[f64], i: usize, k: usize, x: f64, y: f64) -> f64 {
    let m = window.len();
    let mut buf = [0.0; MB + 2];
    buf[..=i].copy_from_slice(&window[..=i]);
    buf[i + 1..=m].copy_from_slice(&window[i..]);
    let s = &buf[..=m];
    let mut v = 0.0;
    if i != 0 {
        v += normalised_piece_at(&s[1..], k, x, y);
    }
    if i != m - 1 {
        v -= normalised_piece_at(&s[..m], k, x, y);
    }
    v
}

/// The B-spline functor `B_p(t)` on a local knot vector of length `p + 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalKnots {
    degree: usize,
    knots: KnotVector,
}

impl LocalKnots {
    pub fn new(degree: usize, knots: KnotVector) -> Result<Self> {
        if knots.len() != degree + 2 {
            return Err(Error::LocalArity {
                degree,
                expected: degree + 2,
                found: knots.len(),
            });
        }
        if degree > MAX_DEGREE {
            return Err(Error::InvalidDegree(format!(
                "degree {degree} exceeds {MAX_DEGREE}"
            )));
        }
        Ok(Self { degree, knots })
    }

    pub fn from_slice(degree: usize, knots: &[f64]) -> Result<Self> {
        Self::new(degree, KnotVector::new(knots.to_vec())?)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn knots(&self) -> &KnotVector {
        &self.knots
    }

    /// Cox-de Boor evaluation.
    pub fn eval(&self, x: f64) -> f64 {
        window_value(self.knots.as_slice(), 0, x)
    }

    /// Evaluation through the divided-difference representation
    /// `|t| [t_1, ..., t_{p+2}] (. - x)_+^p`.
    pub fn eval_divided(&self, x: f64) -> Result<f64> {
        let p = self.degree;
        let dd = divided_difference(self.knots.as_slice(), truncated_power(x, p))?;
        Ok(self.knots.width() * dd)
    }

    /// `B_p / |t|`. Zero width is a Dirac and cannot be evaluated.
    pub fn normalised(&self, x: f64) -> Result<f64> {
        let w = self.knots.width();
        if w <= 0.0 {
            return Err(Error::DistributionalValue("normalised spline of zero width"));
        }
        Ok(self.eval(x) / w)
    }

    /// `D^k B_p(x)`; at `k = p` the right limit is returned at knots.
    pub fn eval_dx(&self, x: f64, k: usize) -> Result<f64> {
        if k > self.degree {
            return Err(Error::DerivativeOrder {
                order: k,
                degree: self.degree,
            });
        }
        Ok(window_value(self.knots.as_slice(), k, x))
    }

    /// Derivative with respect to knot `i` (0-based).
    pub fn eval_dknot(&self, i: usize, x: f64) -> Result<f64> {
        self.check_index(i)?;
        if self.degree == 0 {
            return Err(Error::DistributionalValue(
                "knot derivative of a degree-0 spline",
            ));
        }
        Ok(dknot_piece_at(self.knots.as_slice(), i, 0, x, x))
    }

    /// Mixed derivative `d/dt_i D B_p(x)`; needs `p >= 2`.
    pub fn eval_dknot_dx(&self, i: usize, x: f64) -> Result<f64> {
        self.check_index(i)?;
        if self.degree < 2 {
            return Err(Error::DistributionalValue(
                "mixed knot derivative needs degree >= 2",
            ));
        }
        Ok(dknot_piece_at(self.knots.as_slice(), i, 1, x, x))
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.knots.len() {
            return Err(Error::KnotIndex {
                index: i,
                len: self.knots.len(),
            });
        }
        Ok(())
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// Derivatives of `y -> (y - x)_+^p`, with `(0)_+^0 = 0`.
pub fn truncated_power(x: f64, p: usize) -> impl Fn(f64, usize) -> Option<f64> {
    move |y, r| {
        if r > p {
            return None;
        }
        let d = y - x;
        if d <= 0.0 {
            return Some(0.0);
        }
        Some(factorial(p) / factorial(p - r) * d.powi((p - r) as i32))
    }
}

/// Divided difference `[y_1, ..., y_m] f` over sorted abscissae.
///
/// `f(y, r)` returns the `r`-th derivative at `y` or `None` if unavailable.
/// Repeated abscissae use the confluent rule `D^r f(y) / r!`.
pub fn divided_difference<F>(ys: &[f64], f: F) -> Result<f64>
where
    F: Fn(f64, usize) -> Option<f64>,
{
    let m = ys.len();
    if m == 0 {
        return Err(Error::InvalidArity { len: 0, min: 1 });
    }
    for i in 1..m {
        if ys[i] < ys[i - 1] {
            return Err(Error::Unsorted { index: i });
        }
    }
    // table[i] holds [y_i .. y_{i+len-1}] for the current length
    let mut table: Vec<f64> = Vec::with_capacity(m);
    for &y in ys {
        table.push(f(y, 0).ok_or(Error::MissingDerivative { order: 0 })?);
    }
    for len in 2..=m {
        let mut next = Vec::with_capacity(m - len + 1);
        for i in 0..=(m - len) {
            let (a, b) = (ys[i], ys[i + len - 1]);
            if a == b {
                let r = len - 1;
                let d = f(a, r).ok_or(Error::MissingDerivative { order: r })?;
                next.push(d / factorial(r));
            } else {
                next.push((table[i + 1] - table[i]) / (b - a));
            }
        }
        table = next;
    }
    Ok(table[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn lk(p: usize, t: &[f64]) -> LocalKnots {
        LocalKnots::from_slice(p, t).unwrap()
    }

    #[test]
    fn reference_values() {
        assert_abs_diff_eq!(lk(2, &[0.0, 1.0, 2.0, 3.0]).eval(1.5), 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(lk(1, &[1.0, 1.0, 2.0]).eval(1.5), 0.5, epsilon = 1e-15);
        let b = lk(1, &[0.0, 1.0, 2.0]);
        assert_abs_diff_eq!(b.eval_dknot(1, 1.5).unwrap(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(b.eval_dknot(0, 1.5).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(b.eval_dx(0.5, 1).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(b.eval_dx(1.5, 1).unwrap(), -1.0, epsilon = 1e-15);
    }

    #[test]
    fn half_open_cells() {
        let b = lk(0, &[0.0, 1.0]);
        assert_eq!(b.eval(0.0), 1.0);
        assert_eq!(b.eval(1.0), 0.0);
        // right limit of the derivative at an interior knot
        let b = lk(1, &[0.0, 1.0, 2.0]);
        assert_eq!(b.eval_dx(1.0, 1).unwrap(), -1.0);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            LocalKnots::from_slice(2, &[0.0, 1.0]),
            Err(Error::LocalArity { .. })
        ));
        let b = lk(1, &[0.0, 1.0, 2.0]);
        assert!(matches!(b.eval_dx(0.5, 2), Err(Error::DerivativeOrder { .. })));
        assert!(b.eval_dknot_dx(0, 0.5).is_err());
        assert!(lk(0, &[0.0, 1.0]).eval_dknot(0, 0.5).is_err());
        assert!(lk(1, &[1.0, 1.0, 1.0]).normalised(1.0).is_err());
    }

    #[test]
    fn divided_difference_matches_cox_de_boor() {
        let b = lk(3, &[0.0, 0.3, 1.1, 1.7, 2.5]);
        for j in 0..50 {
            let x = -0.1 + 2.7 * j as f64 / 49.0;
            assert_abs_diff_eq!(b.eval(x), b.eval_divided(x).unwrap(), epsilon = 1e-12);
        }
    }

    #[test]
    fn confluent_divided_difference() {
        // [y, y, y] f = f''(y) / 2
        let f = |y: f64, r: usize| match r {
            0 => Some(y.powi(3)),
            1 => Some(3.0 * y * y),
            2 => Some(6.0 * y),
            _ => None,
        };
        assert_abs_diff_eq!(divided_difference(&[2.0, 2.0, 2.0], f).unwrap(), 6.0, epsilon = 1e-14);
        // [0, 1, 1] x^3 = ([1,1] - [0,1]) / 1 = 3 - 1
        assert_abs_diff_eq!(divided_difference(&[0.0, 1.0, 1.0], f).unwrap(), 2.0, epsilon = 1e-14);
        let g = |y: f64, r: usize| if r == 0 { Some(y) } else { None };
        assert!(matches!(
            divided_difference(&[1.0, 1.0], g),
            Err(Error::MissingDerivative { order: 1 })
        ));
    }

    #[test]
    fn span_ders_matches_window() {
        let t = [0.0, 0.5, 0.9, 1.4, 2.0, 2.2, 3.0];
        let p = 2;
        let x = 1.1;
        let c = cell_containing(&t, x).unwrap();
        let tab = span_ders(&t, p, c, x, 2);
        for a in 0..=p {
            let j = c - p + a;
            let w = &t[j..j + p + 2];
            for k in 0..=2 {
                assert_abs_diff_eq!(tab[k][a], window_value(w, k, x), epsilon = 1e-13);
            }
        }
    }
}
