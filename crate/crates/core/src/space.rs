//! Multi-patch tensor-product spline spaces, DOF layout and uniform initialisation.

use std::ops::Range;

use crate::bspline::{patch_cell, span_ders, MAX_DEGREE};
use crate::error::{Error, Result};
use crate::knots::KnotVector;

/// How the space treats the domain boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryMode {
    /// Knots may leave the domain; used for L2 approximation.
    Free,
    /// All knots stay inside the domain so every basis function has zero trace.
    ZeroTrace,
}

/// One tensor-product patch: per-axis degree, knots and trainable mask.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchSpec {
    degrees: Vec<usize>,
    knots: Vec<KnotVector>,
    trainable: Vec<Vec<bool>>,
}

impl PatchSpec {
    pub fn new(degrees: Vec<usize>, knots: Vec<KnotVector>, trainable: Vec<Vec<bool>>) -> Result<Self> {
        if degrees.len() != knots.len() {
            return Err(Error::DimensionMismatch {
                expected: degrees.len(),
                found: knots.len(),
            });
        }
        if trainable.len() != knots.len() {
            return Err(Error::DimensionMismatch {
                expected: knots.len(),
                found: trainable.len(),
            });
        }
        for ((p, k), m) in degrees.iter().zip(&knots).zip(&trainable) {
            if *p > MAX_DEGREE {
                return Err(Error::InvalidDegree(format!("degree {p} exceeds {MAX_DEGREE}")));
            }
            if k.len() < p + 2 {
                return Err(Error::GridTooSmall(format!(
                    "{} knots cannot carry a degree-{p} basis",
                    k.len()
                )));
            }
            if m.len() != k.len() {
                return Err(Error::DimensionMismatch {
                    expected: k.len(),
                    found: m.len(),
                });
            }
        }
        Ok(Self {
            degrees,
            knots,
            trainable,
        })
    }

    /// Patch with every knot trainable.
    pub fn all_trainable(degrees: Vec<usize>, knots: Vec<KnotVector>) -> Result<Self> {
        let mask = knots.iter().map(|k| vec![true; k.len()]).collect();
        Self::new(degrees, knots, mask)
    }

    pub fn dim(&self) -> usize {
        self.degrees.len()
    }

    pub fn degree(&self, axis: usize) -> usize {
        self.degrees[axis]
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    pub fn knots(&self, axis: usize) -> &KnotVector {
        &self.knots[axis]
    }

    pub fn trainable(&self, axis: usize) -> &[bool] {
        &self.trainable[axis]
    }

    /// Number of basis functions along `axis`.
    pub fn n_basis(&self, axis: usize) -> usize {
        self.knots[axis].len() - self.degrees[axis] - 1
    }

    pub fn shape(&self) -> Vec<usize> {
        (0..self.dim()).map(|t| self.n_basis(t)).collect()
    }

    pub fn n_dofs(&self) -> usize {
        self.shape().iter().product()
    }
}

/// Values of the basis functions along one axis that may be non-zero at a point.
#[derive(Debug, Clone)]
pub struct AxisBasis {
    /// Index of the first entry in `values`.
    pub start: usize,
    pub values: Vec<f64>,
}

/// A sum of tensor-product patches over a box domain.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiPatchSpace {
    patches: Vec<PatchSpec>,
    domain: Vec<(f64, f64)>,
    mode: BoundaryMode,
    offsets: Vec<usize>,
}

impl MultiPatchSpace {
    pub fn new(patches: Vec<PatchSpec>, domain: Vec<(f64, f64)>, mode: BoundaryMode) -> Result<Self> {
        if patches.is_empty() {
            return Err(Error::GridTooSmall("space without patches".into()));
        }
        for p in &patches {
            if p.dim() != domain.len() {
                return Err(Error::DimensionMismatch {
                    expected: domain.len(),
                    found: p.dim(),
                });
            }
        }
        for &(a, b) in &domain {
            if !(a < b) {
                return Err(Error::OutOfRange { x: b, lo: a, hi: b });
            }
        }
        let mut offsets = Vec::with_capacity(patches.len() + 1);
        let mut acc = 0;
        offsets.push(0);
        for p in &patches {
            acc += p.n_dofs();
            offsets.push(acc);
        }
        Ok(Self {
            patches,
            domain,
            mode,
            offsets,
        })
    }

    pub fn dim(&self) -> usize {
        self.domain.len()
    }

    pub fn domain(&self) -> &[(f64, f64)] {
        &self.domain
    }

    pub fn mode(&self) -> BoundaryMode {
        self.mode
    }

    pub fn patches(&self) -> &[PatchSpec] {
        &self.patches
    }

    pub fn patch(&self, s: usize) -> &PatchSpec {
        &self.patches[s]
    }

    pub fn n_patches(&self) -> usize {
        self.patches.len()
    }

    /// Dimension of the weight space.
    pub fn n_dofs(&self) -> usize {
        self.offsets[self.patches.len()]
    }

    /// Total number of knots over all patches and axes.
    pub fn n_knots(&self) -> usize {
        self.patches
            .iter()
            .map(|p| (0..p.dim()).map(|t| p.knots(t).len()).sum::<usize>())
            .sum()
    }

    /// Smallest degree over all patches and axes.
    pub fn min_degree(&self) -> usize {
        self.patches
            .iter()
            .flat_map(|p| p.degrees().iter().copied())
            .min()
            .unwrap_or(0)
    }

    /// DOF range of patch `s`.
    pub fn patch_range(&self, s: usize) -> Range<usize> {
        self.offsets[s]..self.offsets[s + 1]
    }

    /// Flat DOF index: patch-major, then row-major in the multi-index.
    pub fn flat_index(&self, s: usize, idx: &[usize]) -> usize {
        let shape = self.patches[s].shape();
        let mut f = 0;
        for (i, n) in idx.iter().zip(&shape) {
            f = f * n + i;
        }
        self.offsets[s] + f
    }

    /// Inverse of [`flat_index`](Self::flat_index).
    pub fn multi_index(&self, flat: usize) -> (usize, Vec<usize>) {
        let s = self.offsets.partition_point(|&o| o <= flat) - 1;
        let shape = self.patches[s].shape();
        let mut rem = flat - self.offsets[s];
        let mut idx = vec![0; shape.len()];
        for t in (0..shape.len()).rev() {
            idx[t] = rem % shape[t];
            rem /= shape[t];
        }
        (s, idx)
    }

    /// Locations `(patch, axis, knot)` of the trainable knots, in parameter order.
    pub fn free_knots(&self) -> Vec<(usize, usize, usize)> {
        let mut v = Vec::new();
        for (s, p) in self.patches.iter().enumerate() {
            for t in 0..p.dim() {
                for (m, &free) in p.trainable(t).iter().enumerate() {
                    if free {
                        v.push((s, t, m));
                    }
                }
            }
        }
        v
    }

    pub fn n_free_knots(&self) -> usize {
        self.patches
            .iter()
            .map(|p| (0..p.dim()).map(|t| p.trainable(t).iter().filter(|&&b| b).count()).sum::<usize>())
            .sum()
    }

    /// Trainable knot values as a flat vector.
    pub fn knot_params(&self) -> Vec<f64> {
        self.free_knots()
            .into_iter()
            .map(|(s, t, m)| self.patches[s].knots(t)[m])
            .collect()
    }

    /// Copy of the space with new trainable knot values.
    pub fn with_knot_params(&self, xi: &[f64]) -> Result<Self> {
        let n = self.n_free_knots();
        if xi.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: xi.len(),
            });
        }
        let mut patches = self.patches.clone();
        let mut it = xi.iter();
        for p in patches.iter_mut() {
            for t in 0..p.dim() {
                let mut v = p.knots[t].as_slice().to_vec();
                for (m, &free) in p.trainable[t].iter().enumerate() {
                    if free {
                        v[m] = *it.next().expect("length checked");
                    }
                }
                p.knots[t] = KnotVector::new(v)?;
            }
        }
        Ok(Self {
            patches,
            domain: self.domain.clone(),
            mode: self.mode,
            offsets: self.offsets.clone(),
        })
    }

    /// Basis indices along `axis` of patch `s` that may be non-zero at `x`.
    pub fn active_basis(&self, s: usize, axis: usize, x: f64) -> Range<usize> {
        let p = &self.patches[s];
        let deg = p.degree(axis);
        let nb = p.n_basis(axis);
        match patch_cell(p.knots(axis).as_slice(), x) {
            Some(c) => {
                let lo = c.saturating_sub(deg);
                let hi = (c + 1).min(nb);
                lo.min(hi)..hi
            }
            None => 0..0,
        }
    }

    /// Derivatives of order `k` of the active basis functions along one axis.
    pub fn axis_basis(&self, s: usize, axis: usize, x: f64, k: usize) -> Option<AxisBasis> {
        let p = &self.patches[s];
        let deg = p.degree(axis);
        let knots = p.knots(axis).as_slice();
        let c = patch_cell(knots, x)?;
        let tab = span_ders(knots, deg, c, x, k);
        let nb = p.n_basis(axis);
        let start = c.saturating_sub(deg);
        let end = (c + 1).min(nb);
        if start >= end {
            return None;
        }
        let values = (start..end).map(|j| tab[k][j + deg - c]).collect();
        Some(AxisBasis { start, values })
    }

    /// Evaluates `sum_s sum_I W_{s,I} prod_t D^{orders_t} B_{s,I_t}(x_t)`.
    pub fn realise_ders(&self, w: &[f64], x: &[f64], orders: &[usize]) -> f64 {
        let mut total = 0.0;
        for s in 0..self.patches.len() {
            let mut axes = Vec::with_capacity(x.len());
            for t in 0..x.len() {
                match self.axis_basis(s, t, x[t], orders[t]) {
                    Some(b) => axes.push(b),
                    None => break,
                }
            }
            if axes.len() != x.len() {
                continue;
            }
            let shape = self.patches[s].shape();
            let base = self.offsets[s];
            for_each_multi(&axes.iter().map(|a| a.values.len()).collect::<Vec<_>>(), |loc| {
                let mut f = 0;
                let mut v = 1.0;
                for t in 0..loc.len() {
                    f = f * shape[t] + axes[t].start + loc[t];
                    v *= axes[t].values[loc[t]];
                }
                total += w[base + f] * v;
            });
        }
        total
    }

    /// Evaluates the spline with weights `w` at `x`.
    pub fn realise(&self, w: &[f64], x: &[f64]) -> f64 {
        self.realise_ders(w, x, &vec![0; x.len()])
    }

    /// Gradient of the spline at `x`.
    pub fn realise_grad(&self, w: &[f64], x: &[f64]) -> Vec<f64> {
        (0..x.len())
            .map(|t| {
                let mut o = vec![0; x.len()];
                o[t] = 1;
                self.realise_ders(w, x, &o)
            })
            .collect()
    }

    /// Smallest distance between knots of different patches along `axis`.
    /// Infinite for a single patch.
    pub fn cross_patch_mesh_size(&self, axis: usize) -> f64 {
        let mut h = f64::INFINITY;
        for a in 0..self.patches.len() {
            for b in a + 1..self.patches.len() {
                let ka = self.patches[a].knots(axis).as_slice();
                let kb = self.patches[b].knots(axis).as_slice();
                for &x in ka {
                    let i = kb.partition_point(|&y| y < x);
                    if i < kb.len() {
                        h = h.min(kb[i] - x);
                    }
                    if i > 0 {
                        h = h.min(x - kb[i - 1]);
                    }
                }
            }
        }
        h
    }

    /// Plain-text snapshot: one line per patch axis; floats print round-trip exact.
    pub fn snapshot(&self) -> String {
        let mut out = String::from("freeknot-space 1\n");
        out.push_str(match self.mode {
            BoundaryMode::Free => "mode free\n",
            BoundaryMode::ZeroTrace => "mode zero-trace\n",
        });
        for (a, b) in &self.domain {
            out.push_str(&format!("domain {a:?} {b:?}\n"));
        }
        for (s, p) in self.patches.iter().enumerate() {
            for t in 0..p.dim() {
                let mask: String = p.trainable(t).iter().map(|&b| if b { '1' } else { '0' }).collect();
                out.push_str(&format!("patch {s} axis {t} degree {} mask {mask} knots", p.degree(t)));
                for k in p.knots(t).as_slice() {
                    out.push_str(&format!(" {k:?}"));
                }
                out.push('\n');
            }
        }
        out
    }

    /// Parses a snapshot written by [`snapshot`](Self::snapshot).
    pub fn from_snapshot(text: &str) -> Result<Self> {
        let perr = |m: &str| Error::Parse(m.to_string());
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        if lines.next().map(str::trim) != Some("freeknot-space 1") {
            return Err(perr("missing snapshot header"));
        }
        let mode = match lines.next().map(str::trim) {
            Some("mode free") => BoundaryMode::Free,
            Some("mode zero-trace") => BoundaryMode::ZeroTrace,
            _ => return Err(perr("missing mode line")),
        };
        let num = |s: &str| s.parse::<f64>().map_err(|_| perr(&format!("bad number '{s}'")));
        let int = |s: &str| s.parse::<usize>().map_err(|_| perr(&format!("bad integer '{s}'")));
        let mut domain = Vec::new();
        let mut axes: Vec<(usize, usize, usize, Vec<bool>, Vec<f64>)> = Vec::new();
        for line in lines {
            let tok: Vec<&str> = line.split_whitespace().collect();
            match tok.first() {
                Some(&"domain") if tok.len() == 3 => domain.push((num(tok[1])?, num(tok[2])?)),
                Some(&"patch") if tok.len() >= 9 => {
                    if tok[2] != "axis" || tok[4] != "degree" || tok[6] != "mask" || tok[8] != "knots" {
                        return Err(perr("malformed patch line"));
                    }
                    let mask: Vec<bool> = tok[7].chars().map(|c| c == '1').collect();
                    let knots = tok[9..].iter().map(|s| num(s)).collect::<Result<Vec<_>>>()?;
                    axes.push((int(tok[1])?, int(tok[3])?, int(tok[5])?, mask, knots));
                }
                _ => return Err(perr(&format!("unexpected line '{line}'"))),
            }
        }
        let d = domain.len();
        let mut patches = Vec::new();
        for chunk in axes.chunks(d.max(1)) {
            if chunk.len() != d {
                return Err(perr("incomplete patch"));
            }
            let mut degs = Vec::new();
            let mut kvs = Vec::new();
            let mut masks = Vec::new();
            for (t, (s, ax, p, mask, knots)) in chunk.iter().enumerate() {
                if *ax != t || *s != patches.len() {
                    return Err(perr("patch lines out of order"));
                }
                degs.push(*p);
                kvs.push(KnotVector::new(knots.clone())?);
                masks.push(mask.clone());
            }
            patches.push(PatchSpec::new(degs, kvs, masks)?);
        }
        Self::new(patches, domain, mode)
    }

    /// Uniform space for L2 approximation.
    ///
    /// Every axis is split into `patches_per_axis` patches with `cells` cells each.
    /// Each patch carries `degree` knots outside its cells on both sides;
    /// neighbouring patches share `degree + 1` knots so that together they span
    /// the uniform spline space on the whole domain. All knots are trainable.
    pub fn init_uniform_approx(
        domain: &[(f64, f64)],
        degree: usize,
        cells: usize,
        patches_per_axis: usize,
    ) -> Result<Self> {
        check_layout(degree, cells, patches_per_axis)?;
        let per_axis: Vec<Vec<(Vec<f64>, Vec<bool>)>> = domain
            .iter()
            .map(|&(a, b)| {
                let g = global_knots(a, b, degree, cells, patches_per_axis);
                let step = cells + degree;
                let n = cells + 2 * degree + 1;
                (0..patches_per_axis)
                    .map(|r| (g[r * step..r * step + n].to_vec(), vec![true; n]))
                    .collect()
            })
            .collect();
        Self::from_axis_chunks(per_axis, degree, domain, BoundaryMode::Free)
    }

    /// Uniform zero-trace space for the Poisson problem.
    ///
    /// Like [`init_uniform_approx`](Self::init_uniform_approx) but the outside
    /// knots are replaced by repeating the boundary knot, giving multiplicity
    /// `degree` at the domain boundary. Those repeated knots are fixed.
    pub fn init_uniform_poisson(
        domain: &[(f64, f64)],
        degree: usize,
        cells: usize,
        patches_per_axis: usize,
    ) -> Result<Self> {
        if degree < 1 {
            return Err(Error::InvalidDegree("zero-trace spaces need degree >= 1".into()));
        }
        check_layout(degree, cells, patches_per_axis)?;
        let mut per_axis = Vec::new();
        for &(a, b) in domain {
            let g: Vec<f64> = global_knots(a, b, degree, cells, patches_per_axis)
                .into_iter()
                .map(|x| x.clamp(a, b))
                .collect();
            let step = cells + degree;
            let n = cells + 2 * degree + 1;
            let total = g.len();
            let mut chunks = Vec::new();
            for r in 0..patches_per_axis {
                let lo = (r * step).max(1);
                let hi = (r * step + n).min(total - 1);
                let k = g[lo..hi].to_vec();
                if k.len() < degree + 3 {
                    return Err(Error::GridTooSmall(format!(
                        "{cells} cells per patch leave no interior basis at degree {degree}"
                    )));
                }
                let count = |v: f64| k.iter().filter(|&&x| x == v).count();
                let (ca, cb) = (count(a), count(b));
                let mask = k
                    .iter()
                    .map(|&x| !((x == a && ca >= 2) || (x == b && cb >= 2)))
                    .collect();
                chunks.push((k, mask));
            }
            per_axis.push(chunks);
        }
        Self::from_axis_chunks(per_axis, degree, domain, BoundaryMode::ZeroTrace)
    }

    fn from_axis_chunks(
        per_axis: Vec<Vec<(Vec<f64>, Vec<bool>)>>,
        degree: usize,
        domain: &[(f64, f64)],
        mode: BoundaryMode,
    ) -> Result<Self> {
        let d = per_axis.len();
        let counts: Vec<usize> = per_axis.iter().map(Vec::len).collect();
        let mut patches = Vec::new();
        let mut err = None;
        for_each_multi(&counts, |idx| {
            if err.is_some() {
                return;
            }
            let mut kvs = Vec::with_capacity(d);
            let mut masks = Vec::with_capacity(d);
            for t in 0..d {
                let (k, m) = &per_axis[t][idx[t]];
                match KnotVector::new(k.clone()) {
                    Ok(kv) => kvs.push(kv),
                    Err(e) => {
                        err = Some(e);
                        return;
                    }
                }
                masks.push(m.clone());
            }
            match PatchSpec::new(vec![degree; d], kvs, masks) {
                Ok(p) => patches.push(p),
                Err(e) => err = Some(e),
            }
        });
        if let Some(e) = err {
            return Err(e);
        }
        Self::new(patches, domain.to_vec(), mode)
    }
}

fn check_layout(degree: usize, cells: usize, patches_per_axis: usize) -> Result<()> {
    if degree > MAX_DEGREE {
        return Err(Error::InvalidDegree(format!("degree {degree} exceeds {MAX_DEGREE}")));
    }
    if cells == 0 || patches_per_axis == 0 {
        return Err(Error::GridTooSmall("need at least one cell and one patch per axis".into()));
    }
    Ok(())
}

/// Uniform knots covering all patches of one axis, `degree` of them outside on each side.
fn global_knots(a: f64, b: f64, degree: usize, cells: usize, patches: usize) -> Vec<f64> {
    let total = patches * (cells + degree) + degree + 1;
    let interior = total - 1 - 2 * degree;
    let h = (b - a) / interior as f64;
    (0..total)
        .map(|j| {
            if j == degree + interior {
                b
            } else {
                a + (j as f64 - degree as f64) * h
            }
        })
        .collect()
}

/// Calls `f` for every multi-index below `shape`, last axis fastest.
pub fn for_each_multi<F: FnMut(&[usize])>(shape: &[usize], mut f: F) {
    if shape.iter().any(|&n| n == 0) {
        return;
    }
    let mut idx = vec![0; shape.len()];
    loop {
        f(&idx);
        let mut t = shape.len();
        loop {
            if t == 0 {
                return;
            }
            t -= 1;
            idx[t] += 1;
            if idx[t] < shape[t] {
                break;
            }
            idx[t] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn dimensions() {
        let kv = KnotVector::uniform(0.0, 1.0, 8).unwrap();
        let p = PatchSpec::all_trainable(vec![2, 2], vec![kv.clone(), kv]).unwrap();
        let s = MultiPatchSpace::new(vec![p], vec![(0.0, 1.0); 2], BoundaryMode::Free).unwrap();
        assert_eq!(s.n_dofs(), 25);
        assert_eq!(s.n_knots(), 16);
        let kv = KnotVector::uniform(0.0, 1.0, 6).unwrap();
        let p = PatchSpec::all_trainable(vec![1], vec![kv]).unwrap();
        let s = MultiPatchSpace::new(vec![p], vec![(0.0, 1.0)], BoundaryMode::Free).unwrap();
        assert_eq!(s.n_dofs(), 4);
    }

    #[test]
    fn uniform_approx_knots() {
        let s = MultiPatchSpace::init_uniform_approx(&[(-1.0, 1.0)], 1, 3, 1).unwrap();
        let k = s.patch(0).knots(0).as_slice();
        let expect = [-5.0 / 3.0, -1.0, -1.0 / 3.0, 1.0 / 3.0, 1.0, 5.0 / 3.0];
        assert_eq!(k.len(), 6);
        for (a, b) in k.iter().zip(expect) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }
        assert_eq!(k[1], -1.0);
        assert_eq!(k[4], 1.0);
    }

    #[test]
    fn multi_patch_overlap() {
        let p = 2;
        let s = MultiPatchSpace::init_uniform_approx(&[(-1.0, 1.0)], p, 4, 3).unwrap();
        for r in 0..2 {
            let a = s.patch(r).knots(0).as_slice();
            let b = s.patch(r + 1).knots(0).as_slice();
            assert_eq!(&a[a.len() - p - 1..], &b[..p + 1]);
        }
        // same count as one patch over the joint grid
        let cells = 3 * (4 + p) - p;
        let one = MultiPatchSpace::init_uniform_approx(&[(-1.0, 1.0)], p, cells, 1).unwrap();
        assert_eq!(s.n_dofs(), one.n_dofs());
    }

    #[test]
    fn poisson_boundary_multiplicity() {
        let s = MultiPatchSpace::init_uniform_poisson(&[(-1.0, 1.0)], 2, 4, 1).unwrap();
        let k = s.patch(0).knots(0).as_slice();
        assert_eq!(&k[..2], &[-1.0, -1.0]);
        assert_eq!(&k[k.len() - 2..], &[1.0, 1.0]);
        assert!(k.iter().all(|&x| (-1.0..=1.0).contains(&x)));
        let m = s.patch(0).trainable(0);
        assert!(!m[0] && !m[1] && m[2]);
        assert_eq!(s.n_dofs(), 4 + 2 - 2);
        // every basis function vanishes on the boundary
        let w = vec![1.0; s.n_dofs()];
        assert_abs_diff_eq!(s.realise(&w, &[-1.0]), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.realise(&w, &[1.0]), 0.0, epsilon = 1e-15);
        assert!(MultiPatchSpace::init_uniform_poisson(&[(-1.0, 1.0)], 0, 4, 1).is_err());
        assert!(MultiPatchSpace::init_uniform_poisson(&[(-1.0, 1.0)], 1, 1, 1).is_err());
        let s1 = MultiPatchSpace::init_uniform_poisson(&[(-1.0, 1.0)], 1, 4, 1).unwrap();
        assert!(s1.patch(0).trainable(0).iter().all(|&b| b));
    }

    #[test]
    fn active_basis_example() {
        let kv = KnotVector::new(vec![0.0, 1.0, 2.0, 3.0, 4.0]).unwrap();
        let p = PatchSpec::all_trainable(vec![1], vec![kv]).unwrap();
        let s = MultiPatchSpace::new(vec![p], vec![(0.0, 4.0)], BoundaryMode::Free).unwrap();
        assert_eq!(s.active_basis(0, 0, 1.5), 0..2);
        assert_eq!(s.active_basis(0, 0, 4.0), 2..3);
        assert_eq!(s.active_basis(0, 0, 5.0), 0..0);
    }

    #[test]
    fn layout_roundtrip() {
        let s = MultiPatchSpace::init_uniform_approx(&[(-1.0, 1.0); 2], 1, 2, 2).unwrap();
        for f in 0..s.n_dofs() {
            let (p, idx) = s.multi_index(f);
            assert_eq!(s.flat_index(p, &idx), f);
        }
    }

    #[test]
    fn snapshot_roundtrip() {
        let s = MultiPatchSpace::init_uniform_poisson(&[(-1.0, 1.0), (0.0, 0.3)], 3, 3, 2).unwrap();
        let back = MultiPatchSpace::from_snapshot(&s.snapshot()).unwrap();
        assert_eq!(s, back);
    }
}
