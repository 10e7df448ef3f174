//! Sum-factorised assembly of separable bilinear and linear forms, their knot
//! derivatives, and operator application without forming the global matrix.

use std::collections::HashMap;
use std::sync::Arc;

use crate::bspline::{cell_containing, dknot_piece_at, span_ders, window_limits, window_piece_at};
use crate::error::{Error, Result};
use crate::quadrature::{adaptive_simpson_vec, gauss_rule, points_for_degree, BreakPartition};
use crate::space::{for_each_multi, MultiPatchSpace};

/// A scalar function of one variable.
pub type Factor = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Default absolute tolerance for data integrals.
pub const DATA_TOL: f64 = 1e-12;

/// `a(u, v) = int D^order u D^order v` along one axis (unit coefficient).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BilinearKernel {
    pub order: usize,
}

/// `l(v) = int data D^order v` along one axis.
#[derive(Clone)]
pub struct LinearKernel {
    pub data: Factor,
    pub order: usize,
}

impl std::fmt::Debug for LinearKernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LinearKernel").field("order", &self.order).finish()
    }
}

/// Sums of tensor products of one-dimensional kernels.
#[derive(Debug, Clone, Default)]
pub struct SeparableForm {
    /// `bilinear[term][axis]`
    pub bilinear: Vec<Vec<BilinearKernel>>,
    /// `linear[term][axis]`
    pub linear: Vec<Vec<LinearKernel>>,
}

/// Dense row-major block of a one-dimensional operator.
#[derive(Debug, Clone, PartialEq)]
pub struct Block1D {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Block1D {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] += v;
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.get(i, j);
            }
        }
        t
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }

    /// Largest `|i - j|` over non-zero entries.
    pub fn bandwidth(&self) -> usize {
        let mut b = 0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                if self.get(i, j) != 0.0 {
                    b = b.max(i.abs_diff(j));
                }
            }
        }
        b
    }
}

/// Whether a knot moved on the row side also moves in the column knot vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coupling {
    /// Row and column share one knot vector (same patch).
    Shared,
    /// Row and column knots are independent (different patches).
    Independent,
}

struct Side<'a> {
    knots: &'a [f64],
    degree: usize,
}

impl Side<'_> {
    fn n_basis(&self) -> usize {
        self.knots.len() - self.degree - 1
    }
}

/// `int_I D^k B_i(row) D^k B_j(col)` for all pairs, on the merged break partition.
pub fn bilinear_block_1d(
    k: usize,
    row_knots: &[f64],
    p: usize,
    col_knots: &[f64],
    q: usize,
    interval: (f64, f64),
) -> Block1D {
    let row = Side {
        knots: row_knots,
        degree: p,
    };
    let col = Side {
        knots: col_knots,
        degree: q,
    };
    let mut block = Block1D::zeros(row.n_basis(), col.n_basis());
    if k > p || k > q {
        return block;
    }
    let lo = interval.0.max(row_knots[0]).max(col_knots[0]);
    let hi = interval
        .1
        .min(row_knots[row_knots.len() - 1])
        .min(col_knots[col_knots.len() - 1]);
    let part = BreakPartition::new(row_knots.iter().chain(col_knots).copied(), lo, hi);
    let rule = gauss_rule(points_for_degree(p + q - 2 * k) + 1).expect("small order");
    for (a, b) in part.cells() {
        let mid = 0.5 * (a + b);
        let (Some(cr), Some(cc)) = (cell_containing(row_knots, mid), cell_containing(col_knots, mid)) else {
            continue;
        };
        for (x, w) in rule.mapped(a, b) {
            let tr = span_ders(row_knots, p, cr, x, k);
            let tc = span_ders(col_knots, q, cc, x, k);
            for ar in 0..=p {
                let Some(i) = (cr + ar).checked_sub(p).filter(|&i| i < row.n_basis()) else {
                    continue;
                };
                let vr = w * tr[k][ar];
                if vr == 0.0 {
                    continue;
                }
                for ac in 0..=q {
                    let Some(j) = (cc + ac).checked_sub(q).filter(|&j| j < col.n_basis()) else {
                        continue;
                    };
                    block.add(i, j, vr * tc[k][ac]);
                }
            }
        }
    }
    block
}

/// Knot breakpoints of `knots` inside `interval`, with the endpoints.
fn segments(knots: &[f64], interval: (f64, f64)) -> Vec<f64> {
    let lo = interval.0.max(knots[0]);
    let hi = interval.1.min(knots[knots.len() - 1]);
    BreakPartition::new(knots.iter().copied(), lo, hi).points().to_vec()
}

/// Moments `int_a^b data L_q` of the Lagrange polynomials on the `p + 1`
/// Gauss nodes of `[a, b]`, by adaptive Simpson. Any integral of `data` times
/// a polynomial `P` of degree `<= p` on the cell is `sum_q P(x_q) mu_q`.
fn cell_moments(data: &Factor, a: f64, b: f64, p: usize, tol: f64) -> (Vec<f64>, Vec<f64>) {
    let rule = gauss_rule(p + 1).expect("degree bounded");
    let r: Vec<f64> = rule.nodes.iter().map(|&t| 0.5 * (t + 1.0)).collect();
    let nodes: Vec<f64> = r.iter().map(|&s| a + (b - a) * s).collect();
    if b <= a {
        return (nodes, vec![0.0; p + 1]);
    }
    // Lagrange polynomials in the reference coordinate stay well defined on
    // arbitrarily short cells.
    let denom: Vec<f64> = (0..=p)
        .map(|q| (0..=p).filter(|&m| m != q).map(|m| r[q] - r[m]).product())
        .collect();
    let res = adaptive_simpson_vec(
        |x, o: &mut [f64]| {
            let f = data(x);
            let s = (x - a) / (b - a);
            for q in 0..=p {
                let mut l = f / denom[q];
                for m in 0..=p {
                    if m != q {
                        l *= s - r[m];
                    }
                }
                o[q] = l;
            }
        },
        p + 1,
        &[a, b],
        tol,
    );
    (nodes, res.value)
}

/// `int_I data D^k B_j` for every basis function; the data integrals use adaptive Simpson.
pub fn linear_vector_1d(kernel: &LinearKernel, knots: &[f64], p: usize, interval: (f64, f64), tol: f64) -> Vec<f64> {
    let nb = knots.len() - p - 1;
    let k = kernel.order;
    let mut out = vec![0.0; nb];
    if k > p {
        return out;
    }
    let segs = segments(knots, interval);
    let share = tol / segs.windows(2).filter(|w| w[1] > w[0]).count().max(1) as f64;
    for w in segs.windows(2) {
        let (a, b) = (w[0], w[1]);
        let Some(c) = cell_containing(knots, 0.5 * (a + b)) else {
            continue;
        };
        let (nodes, mu) = cell_moments(&kernel.data, a, b, p, share);
        for (x, m) in nodes.iter().zip(&mu) {
            let t = span_ders(knots, p, c, *x, k);
            for a in 0..=p {
                if let Some(j) = (c + a).checked_sub(p).filter(|&j| j < nb) {
                    out[j] += m * t[k][a];
                }
            }
        }
    }
    out
}

/// Load vector with its knot derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearWithDerivatives {
    pub values: Vec<f64>,
    /// `dknots[j][i]` is the derivative of entry `j` with respect to knot `j + i`.
    pub dknots: Vec<Vec<f64>>,
}

/// `int_I data D^k B_j` and its derivatives with respect to every knot of `B_j`.
///
/// Inside each knot cell the integrands are `data` times polynomials of
/// degree `<= p`, so both use the same data moments. A moving knot inside `I`
/// where `D^k B_j` jumps adds `data(t) * (left limit - right limit)`.
pub fn linear_with_dknots_1d(
    kernel: &LinearKernel,
    knots: &[f64],
    p: usize,
    interval: (f64, f64),
    tol: f64,
) -> LinearWithDerivatives {
    let nb = knots.len() - p - 1;
    let k = kernel.order;
    let mut values = vec![0.0; nb];
    let mut dknots = vec![vec![0.0; p + 2]; nb];
    if k > p {
        return LinearWithDerivatives { values, dknots };
    }
    let segs = segments(knots, interval);
    let share = tol / segs.windows(2).filter(|w| w[1] > w[0]).count().max(1) as f64;
    for w in segs.windows(2) {
        let (a, b) = (w[0], w[1]);
        let y = 0.5 * (a + b);
        let Some(c) = cell_containing(knots, y) else {
            continue;
        };
        let (nodes, mu) = cell_moments(&kernel.data, a, b, p, share);
        for (x, m) in nodes.iter().zip(&mu) {
            let t = span_ders(knots, p, c, *x, k);
            for a in 0..=p {
                let Some(j) = (c + a).checked_sub(p).filter(|&j| j < nb) else {
                    continue;
                };
                values[j] += m * t[k][a];
                let win = &knots[j..j + p + 2];
                for i in 0..p + 2 {
                    dknots[j][i] += m * dknot_piece_at(win, i, k, *x, y);
                }
            }
        }
    }
    let (lo, hi) = interval;
    for j in 0..nb {
        let win = &knots[j..j + p + 2];
        for i in 0..p + 2 {
            let g = win[i];
            if g < lo || g > hi {
                continue;
            }
            let (l, r) = window_limits(win, k, g);
            if l != r {
                dknots[j][i] += (kernel.data)(g) * (l - r);
            }
        }
    }
    LinearWithDerivatives { values, dknots }
}

/// Derivative of the load vector with respect to knot `m` (0-based).
pub fn d_linear_dknot(
    kernel: &LinearKernel,
    knots: &[f64],
    p: usize,
    interval: (f64, f64),
    m: usize,
    tol: f64,
) -> Result<Vec<f64>> {
    if m >= knots.len() {
        return Err(Error::KnotIndex {
            index: m,
            len: knots.len(),
        });
    }
    let all = linear_with_dknots_1d(kernel, knots, p, interval, tol);
    Ok((0..all.values.len())
        .map(|j| if m >= j && m - j < p + 2 { all.dknots[j][m - j] } else { 0.0 })
        .collect())
}

/// Derivative of `int_I D^k B(row) D^k B(col)` with respect to a knot at `g`.
///
/// `row_i` / `col_i` are the local indices of the moving knot in each window,
/// or `None` if that window does not move.
pub fn bilinear_entry_dknot(
    k: usize,
    row: &[f64],
    row_i: Option<usize>,
    col: &[f64],
    col_i: Option<usize>,
    interval: (f64, f64),
    g: f64,
) -> f64 {
    let p = row.len() - 2;
    let q = col.len() - 2;
    if k > p || k > q {
        return 0.0;
    }
    let lo = interval.0.max(row[0]).max(col[0]);
    let hi = interval.1.min(row[p + 1]).min(col[q + 1]);
    let part = BreakPartition::new(row.iter().chain(col).copied(), lo, hi);
    let rule = gauss_rule(points_for_degree(p + q - 2 * k) + 1).expect("small order");
    let mut v = 0.0;
    for (a, b) in part.cells() {
        let y = 0.5 * (a + b);
        for (x, w) in rule.mapped(a, b) {
            let mut s = 0.0;
            if let Some(i) = row_i {
                s += dknot_piece_at(row, i, k, x, y) * window_piece_at(col, k, x, y);
            }
            if let Some(j) = col_i {
                s += window_piece_at(row, k, x, y) * dknot_piece_at(col, j, k, x, y);
            }
            v += w * s;
        }
    }
    if g >= interval.0 && g <= interval.1 {
        let (lr, rr) = window_limits(row, k, g);
        let (lc, rc) = window_limits(col, k, g);
        let lr = if row_i.is_some() { lr } else { rr };
        let lc = if col_i.is_some() { lc } else { rc };
        v += lr * lc - rr * rc;
    }
    v
}

/// Derivative of the block `int_I D^k B_i(row) D^k B_j(col)` with respect to
/// row knot `m` (0-based).
///
/// With [`Coupling::Shared`] the column knot vector must equal the row knot
/// vector and moves with it. Independent knot vectors with `p = q = k` are not
/// differentiable and are rejected.
pub fn d_bilinear_dknot(
    k: usize,
    row_knots: &[f64],
    p: usize,
    col_knots: &[f64],
    q: usize,
    interval: (f64, f64),
    m: usize,
    coupling: Coupling,
) -> Result<Block1D> {
    if m >= row_knots.len() {
        return Err(Error::KnotIndex {
            index: m,
            len: row_knots.len(),
        });
    }
    if coupling == Coupling::Independent && p == k && q == k {
        return Err(Error::NonDifferentiable(format!(
            "degree {p} with derivative order {k} across independent knot vectors"
        )));
    }
    if coupling == Coupling::Shared && (row_knots != col_knots || p != q) {
        return Err(Error::DimensionMismatch {
            expected: row_knots.len(),
            found: col_knots.len(),
        });
    }
    let nr = row_knots.len() - p - 1;
    let nc = col_knots.len() - q - 1;
    let g = row_knots[m];
    let mut out = Block1D::zeros(nr, nc);
    let in_window = |j: usize, deg: usize| m >= j && m - j < deg + 2;
    for i in 0..nr {
        let ri = in_window(i, p).then(|| m - i);
        let rw = &row_knots[i..i + p + 2];
        for j in 0..nc {
            let ci = (coupling == Coupling::Shared && in_window(j, q)).then(|| m - j);
            if ri.is_none() && ci.is_none() {
                continue;
            }
            let cw = &col_knots[j..j + q + 2];
            if rw[p + 1] < cw[0] || cw[q + 1] < rw[0] {
                continue;
            }
            out.data[i * nc + j] = bilinear_entry_dknot(k, rw, ri, cw, ci, interval, g);
        }
    }
    Ok(out)
}

/// Applies `block` along `axis` of a row-major tensor.
pub fn mode_apply(data: &[f64], shape: &[usize], axis: usize, block: &Block1D) -> (Vec<f64>, Vec<usize>) {
    debug_assert_eq!(block.cols, shape[axis]);
    let outer: usize = shape[..axis].iter().product();
    let inner: usize = shape[axis + 1..].iter().product();
    let n = shape[axis];
    let mut new_shape = shape.to_vec();
    new_shape[axis] = block.rows;
    let mut out = vec![0.0; outer * block.rows * inner];
    for o in 0..outer {
        for i in 0..block.rows {
            let dst = &mut out[(o * block.rows + i) * inner..(o * block.rows + i + 1) * inner];
            for l in 0..n {
                let a = block.get(i, l);
                if a == 0.0 {
                    continue;
                }
                let src = &data[(o * n + l) * inner..(o * n + l + 1) * inner];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += a * s;
                }
            }
        }
    }
    (out, new_shape)
}

/// `M[i, l] = sum over the other axes of a[.., i, ..] * b[.., l, ..]`.
pub fn contract_except(a: &[f64], a_shape: &[usize], b: &[f64], b_shape: &[usize], axis: usize) -> Block1D {
    let outer: usize = a_shape[..axis].iter().product();
    let inner: usize = a_shape[axis + 1..].iter().product();
    let (na, nb) = (a_shape[axis], b_shape[axis]);
    let mut m = Block1D::zeros(na, nb);
    for o in 0..outer {
        for i in 0..na {
            let ra = &a[(o * na + i) * inner..(o * na + i + 1) * inner];
            for l in 0..nb {
                let rb = &b[(o * nb + l) * inner..(o * nb + l + 1) * inner];
                let s: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
                m.add(i, l, s);
            }
        }
    }
    m
}

/// Options for [`assemble`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssemblyOptions {
    /// Absolute tolerance of the adaptive data integrals.
    pub data_tol: f64,
    /// Also compute knot derivatives of the load vectors.
    pub load_derivatives: bool,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        Self {
            data_tol: DATA_TOL,
            load_derivatives: false,
        }
    }
}

/// One-dimensional blocks and loads of a separable form on a multi-patch space.
#[derive(Debug, Clone)]
pub struct AssembledOperator {
    shapes: Vec<Vec<usize>>,
    offsets: Vec<usize>,
    orders: Vec<Vec<usize>>,
    /// `(s1, s2, axis, order) -> block`; zero blocks are omitted.
    blocks: HashMap<(usize, usize, usize, usize), Block1D>,
    /// `loads[term][patch][axis]`
    loads: Vec<Vec<Vec<LinearWithDerivatives>>>,
}

/// Assembles every one-dimensional block and load of `form` on `space`.
pub fn assemble(space: &MultiPatchSpace, form: &SeparableForm, opts: &AssemblyOptions) -> Result<AssembledOperator> {
    let d = space.dim();
    for term in &form.bilinear {
        if term.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: term.len(),
            });
        }
    }
    for term in &form.linear {
        if term.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: term.len(),
            });
        }
    }
    let r = space.n_patches();
    let mut needed: Vec<(usize, usize)> = Vec::new();
    for term in &form.bilinear {
        for (t, ker) in term.iter().enumerate() {
            if !needed.contains(&(t, ker.order)) {
                needed.push((t, ker.order));
            }
        }
    }
    let mut blocks = HashMap::new();
    for &(t, k) in &needed {
        let interval = space.domain()[t];
        for s1 in 0..r {
            for s2 in s1..r {
                let (a, b) = (space.patch(s1), space.patch(s2));
                let blk = bilinear_block_1d(
                    k,
                    a.knots(t).as_slice(),
                    a.degree(t),
                    b.knots(t).as_slice(),
                    b.degree(t),
                    interval,
                );
                if blk.is_zero() {
                    continue;
                }
                if s1 != s2 {
                    blocks.insert((s2, s1, t, k), blk.transpose());
                }
                blocks.insert((s1, s2, t, k), blk);
            }
        }
    }
    let mut loads = Vec::with_capacity(form.linear.len());
    for term in &form.linear {
        let mut per_patch = Vec::with_capacity(r);
        for s in 0..r {
            let p = space.patch(s);
            let mut per_axis = Vec::with_capacity(d);
            for (t, ker) in term.iter().enumerate() {
                let knots = p.knots(t).as_slice();
                let interval = space.domain()[t];
                if opts.load_derivatives {
                    per_axis.push(linear_with_dknots_1d(ker, knots, p.degree(t), interval, opts.data_tol));
                } else {
                    let values = linear_vector_1d(ker, knots, p.degree(t), interval, opts.data_tol);
                    per_axis.push(LinearWithDerivatives {
                        values,
                        dknots: vec![],
                    });
                }
            }
            per_patch.push(per_axis);
        }
        loads.push(per_patch);
    }
    Ok(AssembledOperator {
        shapes: space.patches().iter().map(|p| p.shape()).collect(),
        offsets: (0..=r).map(|s| if s < r { space.patch_range(s).start } else { space.n_dofs() }).collect(),
        orders: form
            .bilinear
            .iter()
            .map(|t| t.iter().map(|k| k.order).collect())
            .collect(),
        blocks,
        loads,
    })
}

impl AssembledOperator {
    pub fn n_dofs(&self) -> usize {
        *self.offsets.last().unwrap_or(&0)
    }

    pub fn n_patches(&self) -> usize {
        self.shapes.len()
    }

    pub fn shape(&self, s: usize) -> &[usize] {
        &self.shapes[s]
    }

    pub fn offset(&self, s: usize) -> usize {
        self.offsets[s]
    }

    pub fn bilinear_orders(&self) -> &[Vec<usize>] {
        &self.orders
    }

    /// One-dimensional block for patches `(s1, s2)` along `axis` with derivative `order`.
    pub fn block(&self, s1: usize, s2: usize, axis: usize, order: usize) -> Option<&Block1D> {
        self.blocks.get(&(s1, s2, axis, order))
    }

    /// One-dimensional load of a linear term.
    pub fn load(&self, term: usize, s: usize, axis: usize) -> &LinearWithDerivatives {
        &self.loads[term][s][axis]
    }

    pub fn n_linear_terms(&self) -> usize {
        self.loads.len()
    }

    fn patch_slice<'a>(&self, w: &'a [f64], s: usize) -> &'a [f64] {
        &w[self.offsets[s]..self.offsets[s + 1]]
    }

    /// `(prod_{t != skip} A_t) w_{s2}` for one term, mapped into patch `s1`'s
    /// index space on the applied axes. `None` if some block vanishes.
    pub(crate) fn apply_pair(&self, term: usize, s1: usize, s2: usize, w: &[f64], skip: Option<usize>) -> Option<(Vec<f64>, Vec<usize>)> {
        let mut data = self.patch_slice(w, s2).to_vec();
        let mut shape = self.shapes[s2].clone();
        for (t, &k) in self.orders[term].iter().enumerate() {
            if Some(t) == skip {
                continue;
            }
            let blk = self.blocks.get(&(s1, s2, t, k))?;
            let (d, sh) = mode_apply(&data, &shape, t, blk);
            data = d;
            shape = sh;
        }
        Some((data, shape))
    }

    /// `A w` by sum factorisation.
    pub fn apply(&self, w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_dofs()];
        self.apply_into(w, &mut out);
        out
    }

    pub fn apply_into(&self, w: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let r = self.n_patches();
        for term in 0..self.orders.len() {
            for s1 in 0..r {
                for s2 in 0..r {
                    if let Some((y, _)) = self.apply_pair(term, s1, s2, w, None) {
                        let dst = &mut out[self.offsets[s1]..self.offsets[s1 + 1]];
                        for (d, v) in dst.iter_mut().zip(&y) {
                            *d += v;
                        }
                    }
                }
            }
        }
    }

    /// The load vector `F`.
    pub fn rhs(&self) -> Vec<f64> {
        let mut f = vec![0.0; self.n_dofs()];
        for term in &self.loads {
            for (s, axes) in term.iter().enumerate() {
                let base = self.offsets[s];
                let shape = &self.shapes[s];
                let mut flat = 0;
                for_each_multi(shape, |idx| {
                    let v: f64 = idx.iter().enumerate().map(|(t, &i)| axes[t].values[i]).product();
                    f[base + flat] += v;
                    flat += 1;
                });
            }
        }
        f
    }

    /// Dense global matrix, for testing.
    pub fn dense(&self) -> Vec<Vec<f64>> {
        let n = self.n_dofs();
        let mut e = vec![0.0; n];
        let mut cols = Vec::with_capacity(n);
        for j in 0..n {
            e[j] = 1.0;
            cols.push(self.apply(&e));
            e[j] = 0.0;
        }
        (0..n).map(|i| (0..n).map(|j| cols[j][i]).collect()).collect()
    }
}
