//! Gauss-Legendre rules, piecewise integration over break partitions and
//! adaptive Simpson / Gauss integration.

use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Largest supported Gauss-Legendre order.
pub const MAX_GAUSS: usize = 32;
/// Recursion cap for the adaptive routines.
pub const MAX_DEPTH: usize = 40;

/// Nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    /// Applies the rule on `[a, b]`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut s = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            s += w * f(mid + half * x);
        }
        s * half
    }

    /// Nodes mapped to `[a, b]` paired with scaled weights.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(x, w)| (mid + half * x, w * half))
    }
}

fn legendre(m: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=m {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

fn build_rule(m: usize) -> QuadratureRule {
    if m == 1 {
        return QuadratureRule {
            nodes: vec![0.0],
            weights: vec![2.0],
        };
    }
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    for i in 0..m.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(m, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(m, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[m - 1 - i] = x;
        weights[i] = w;
        weights[m - 1 - i] = w;
    }
    if m % 2 == 1 {
        nodes[m / 2] = 0.0;
    }
    QuadratureRule { nodes, weights }
}

fn rules() -> &'static Vec<QuadratureRule> {
    static RULES: OnceLock<Vec<QuadratureRule>> = OnceLock::new();
    RULES.get_or_init(|| (1..=MAX_GAUSS).map(build_rule).collect())
}

/// The `m`-point Gauss-Legendre rule, exact for polynomials of degree `2m - 1`.
pub fn gauss_rule(m: usize) -> Result<&'static QuadratureRule> {
    if m == 0 || m > MAX_GAUSS {
        return Err(Error::QuadratureOrder(m));
    }
    Ok(&rules()[m - 1])
}

/// Number of Gauss points that integrates a polynomial of degree `deg` exactly.
pub fn points_for_degree(deg: usize) -> usize {
    (deg / 2 + 1).min(MAX_GAUSS)
}

/// Sorted distinct breakpoints restricted to an interval.
#[derive(Debug, Clone, PartialEq)]
pub struct BreakPartition {
    points: Vec<f64>,
}

impl BreakPartition {
    /// Breakpoints in `[a, b]` together with the endpoints. An interval with
    /// `a >= b` yields a partition without cells.
    pub fn new(points: impl IntoIterator<Item = f64>, a: f64, b: f64) -> Self {
        if !(a < b) {
            return Self { points: vec![] };
        }
        let mut v: Vec<f64> = points
            .into_iter()
            .filter(|&x| x > a && x < b)
            .collect();
        v.push(a);
        v.push(b);
        v.sort_by(|x, y| x.partial_cmp(y).unwrap());
        v.dedup();
        Self { points: v }
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn n_cells(&self) -> usize {
        self.points.len().saturating_sub(1)
    }

    pub fn cells(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.points.windows(2).map(|w| (w[0], w[1]))
    }
}

/// Integrates `f` with `points_for_degree(degree)` Gauss points on every cell.
pub fn integrate_piecewise<F: FnMut(f64) -> f64>(
    mut f: F,
    partition: &BreakPartition,
    degree: usize,
) -> Result<f64> {
    if partition.n_cells() == 0 {
        return Err(Error::EmptyPartition);
    }
    let rule = gauss_rule(points_for_degree(degree))?;
    Ok(partition
        .cells()
        .map(|(a, b)| rule.integrate(a, b, &mut f))
        .sum())
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveResult<T> {
    pub value: T,
    /// Set when some branch hit the depth cap before meeting its tolerance.
    pub depth_exceeded: bool,
    pub evaluations: usize,
}

/// Adaptive Simpson with absolute tolerance `tol` on `[a, b]`.
pub fn adaptive_simpson<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    tol: f64,
) -> AdaptiveResult<f64> {
    let r = adaptive_simpson_vec(|x, out: &mut [f64]| out[0] = f(x), 1, &[a, b], tol);
    AdaptiveResult {
        value: r.value[0],
        depth_exceeded: r.depth_exceeded,
        evaluations: r.evaluations,
    }
}

/// Vector-valued adaptive Simpson over consecutive segments `breaks`.
///
/// `f(x, out)` fills the `n` components at `x`. Each nonempty segment receives
/// an equal share of `tol`; every component must meet it. A share proportional
/// to length would ask sliver segments for accuracy below the resolution of
/// their abscissae.
pub fn adaptive_simpson_vec<F>(mut f: F, n: usize, breaks: &[f64], tol: f64) -> AdaptiveResult<Vec<f64>>
where
    F: FnMut(f64, &mut [f64]),
{
    let mut total = vec![0.0; n];
    let mut flag = false;
    let mut evals = 0;
    if breaks.len() < 2 {
        return AdaptiveResult {
            value: total,
            depth_exceeded: false,
            evaluations: 0,
        };
    }
    let pieces = breaks.windows(2).filter(|w| w[1] > w[0]).count().max(1);
    let seg_tol = tol / pieces as f64;
    let mut fa = vec![0.0; n];
    let mut fm = vec![0.0; n];
    let mut fb = vec![0.0; n];
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        if !(b > a) {
            continue;
        }
        let m = 0.5 * (a + b);
        f(a, &mut fa);
        f(m, &mut fm);
        f(b, &mut fb);
        evals += 3;
        let whole: Vec<f64> = (0..n)
            .map(|j| (b - a) / 6.0 * (fa[j] + 4.0 * fm[j] + fb[j]))
            .collect();
        let mut st = SimpsonState {
            f: &mut f,
            n,
            evals: 0,
            flag: false,
        };
        let v = st.recurse(a, b, &fa, &fm, &fb, &whole, seg_tol, 0);
        evals += st.evals;
        flag |= st.flag;
        for j in 0..n {
            total[j] += v[j];
        }
    }
    AdaptiveResult {
        value: total,
        depth_exceeded: flag,
        evaluations: evals,
    }
}

struct SimpsonState<'a, F> {
    f: &'a mut F,
    n: usize,
    evals: usize,
    flag: bool,
}

impl<F: FnMut(f64, &mut [f64])> SimpsonState<'_, F> {
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        &mut self,
        a: f64,
        b: f64,
        fa: &[f64],
        fm: &[f64],
        fb: &[f64],
        whole: &[f64],
        tol: f64,
        depth: usize,
    ) -> Vec<f64> {
        let n = self.n;
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let mut flm = vec![0.0; n];
        let mut frm = vec![0.0; n];
        (self.f)(lm, &mut flm);
        (self.f)(rm, &mut frm);
        self.evals += 2;
        let h = (b - a) / 12.0;
        let left: Vec<f64> = (0..n).map(|j| h * (fa[j] + 4.0 * flm[j] + fm[j])).collect();
        let right: Vec<f64> = (0..n).map(|j| h * (fm[j] + 4.0 * frm[j] + fb[j])).collect();
        let mut ok = true;
        for j in 0..n {
            let d = left[j] + right[j] - whole[j];
            if !(d.abs() <= 15.0 * tol) {
                ok = false;
                break;
            }
        }
        if ok || depth >= MAX_DEPTH || !(m > a && b > m) {
            if !ok {
                self.flag = true;
            }
            return (0..n)
                .map(|j| {
                    let s = left[j] + right[j];
                    s + (s - whole[j]) / 15.0
                })
                .collect();
        }
        let l = self.recurse(a, m, fa, &flm, fm, &left, 0.5 * tol, depth + 1);
        let r = self.recurse(m, b, fm, &frm, fb, &right, 0.5 * tol, depth + 1);
        l.iter().zip(&r).map(|(x, y)| x + y).collect()
    }
}

/// Adaptive Gauss-Legendre integration over consecutive segments `breaks`.
///
/// A panel is accepted when the 10-point estimate and the sum over its two
/// halves agree to `max(abs_tol, rel_tol * |estimate|)`.
pub fn adaptive_gauss<F: FnMut(f64) -> f64>(
    mut f: F,
    breaks: &[f64],
    abs_tol: f64,
    rel_tol: f64,
) -> AdaptiveResult<f64> {
    let rule = gauss_rule(10).expect("static order");
    let mut total = 0.0;
    let mut flag = false;
    let mut evals = 0;
    let span = if breaks.len() >= 2 {
        breaks[breaks.len() - 1] - breaks[0]
    } else {
        0.0
    };
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        if !(b > a) {
            continue;
        }
        let seg_abs = abs_tol * (b - a) / span;
        let whole = rule.integrate(a, b, &mut f);
        evals += 10;
        let mut stack = vec![(a, b, whole, seg_abs, 0usize)];
        while let Some((a, b, whole, tol, depth)) = stack.pop() {
            let m = 0.5 * (a + b);
            let l = rule.integrate(a, m, &mut f);
            let r = rule.integrate(m, b, &mut f);
            evals += 20;
            let s = l + r;
            let ok = (s - whole).abs() <= tol.max(rel_tol * s.abs());
            if ok || depth >= MAX_DEPTH || !(m > a && b > m) {
                flag |= !ok;
                total += s;
            } else {
                stack.push((a, m, l, 0.5 * tol, depth + 1));
                stack.push((m, b, r, 0.5 * tol, depth + 1));
            }
        }
    }
    AdaptiveResult {
        value: total,
        depth_exceeded: flag,
        evaluations: evals,
    }
}
