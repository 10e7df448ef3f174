//! Shared oracles and generators for the integration tests.
#![allow(dead_code)]

pub mod qp;

use freeknot::assembly::{assemble, AssemblyOptions};
use freeknot::constraints::FeasibleSet;
use freeknot::energy_opt::energy;
use freeknot::problems::ProblemSpec;
use freeknot::space::MultiPatchSpace;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Sorted uniform draws on `[0, L]`, `L` in `[1, 10]`, redrawn until the
/// smallest gap is at least `h_min`.
pub fn random_knots(rng: &mut ChaCha8Rng, n: usize, h_min: f64) -> Vec<f64> {
    loop {
        let l: f64 = rng.random_range(1.0..10.0);
        let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..l)).collect();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if v.windows(2).all(|w| w[1] - w[0] >= h_min) {
            return v;
        }
    }
}

/// Uniform space with its trainable knots jittered by up to `frac` of the
/// local spacing and projected back onto the feasible set.
pub fn jittered(space: &MultiPatchSpace, rng: &mut ChaCha8Rng, frac: f64) -> MultiPatchSpace {
    let xi = space.knot_params();
    let h = (0..space.dim())
        .map(|t| {
            let p = space.patch(0);
            let k = p.knots(t).as_slice();
            (k[k.len() - 1] - k[0]) / (k.len() - 1) as f64
        })
        .fold(f64::INFINITY, f64::min);
    let fs = FeasibleSet::from_space(space, 0.2 * h);
    let axes: Vec<usize> = space.free_knots().iter().map(|&(_, t, _)| t).collect();
    // The energy has a kink where a knot crosses the domain boundary, so
    // keep every free knot clear of it for the difference quotients.
    loop {
        let cand: Vec<f64> = xi.iter().map(|x| x + frac * h * rng.random_range(-1.0..1.0)).collect();
        let proj = fs.project(&cand).unwrap();
        let clear = proj.iter().zip(&axes).all(|(x, &t)| {
            let (a, b) = space.domain()[t];
            (x - a).abs() > 0.05 * h && (x - b).abs() > 0.05 * h
        });
        if clear {
            return space.with_knot_params(&proj).unwrap();
        }
    }
}

/// `K(W, xi)` after re-assembling `A` and `F`.
pub fn energy_at(problem: &ProblemSpec, space: &MultiPatchSpace, w: &[f64], tol: f64) -> f64 {
    let op = assemble(
        space,
        &problem.form(),
        &AssemblyOptions {
            data_tol: tol,
            load_derivatives: false,
        },
    )
    .unwrap();
    energy(&op, w)
}

/// Central finite difference of the energy in every trainable knot.
pub fn fd_energy_gradient(problem: &ProblemSpec, space: &MultiPatchSpace, w: &[f64], eps: f64, tol: f64) -> Vec<f64> {
    let xi = space.knot_params();
    (0..xi.len())
        .map(|i| {
            let mut a = xi.clone();
            let mut b = xi.clone();
            a[i] += eps;
            b[i] -= eps;
            let ea = energy_at(problem, &space.with_knot_params(&a).unwrap(), w, tol);
            let eb = energy_at(problem, &space.with_knot_params(&b).unwrap(), w, tol);
            (ea - eb) / (2.0 * eps)
        })
        .collect()
}

/// `|a - b| <= rel * max(|a|, |b|, scale)`.
pub fn close(a: f64, b: f64, rel: f64, scale: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(scale)
}

/// Textbook Cox-de Boor recursion on half-open intervals, with `0/0 = 0`.
pub fn naive_bspline(t: &[f64], p: usize, x: f64) -> f64 {
    if p == 0 {
        return if t[0] <= x && x < t[1] { 1.0 } else { 0.0 };
    }
    let mut v = 0.0;
    if t[p] > t[0] {
        v += (x - t[0]) / (t[p] - t[0]) * naive_bspline(&t[..p + 1], p - 1, x);
    }
    if t[p + 1] > t[1] {
        v += (t[p + 1] - x) / (t[p + 1] - t[1]) * naive_bspline(&t[1..], p - 1, x);
    }
    v
}

/// Derivative of order `r` of the naive recursion.
pub fn naive_bspline_der(t: &[f64], p: usize, r: usize, x: f64) -> f64 {
    if r == 0 {
        return naive_bspline(t, p, x);
    }
    if p == 0 {
        return 0.0;
    }
    let mut v = 0.0;
    if t[p] > t[0] {
        v += p as f64 / (t[p] - t[0]) * naive_bspline_der(&t[..p + 1], p - 1, r - 1, x);
    }
    if t[p + 1] > t[1] {
        v -= p as f64 / (t[p + 1] - t[1]) * naive_bspline_der(&t[1..], p - 1, r - 1, x);
    }
    v
}

/// Dense 1D matrix `int_a^b D^r B_i D^r B_j` from the naive recursion,
/// integrated cell by cell with a high-order Gauss rule.
pub fn naive_matrix_1d(t: &[f64], p: usize, r: usize, (a, b): (f64, f64)) -> Vec<Vec<f64>> {
    let n = t.len() - p - 1;
    let g = freeknot::quadrature::gauss_rule(10).unwrap();
    let mut breaks: Vec<f64> = t.iter().copied().filter(|x| *x > a && *x < b).collect();
    breaks.push(a);
    breaks.push(b);
    breaks.sort_by(|x, y| x.partial_cmp(y).unwrap());
    breaks.dedup();
    let mut m = vec![vec![0.0; n]; n];
    for w in breaks.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        for (node, wt) in g.nodes.iter().zip(&g.weights) {
            let x = 0.5 * (lo + hi) + 0.5 * (hi - lo) * node;
            let vals: Vec<f64> = (0..n).map(|i| naive_bspline_der(&t[i..i + p + 2], p, r, x)).collect();
            for i in 0..n {
                for j in 0..n {
                    m[i][j] += 0.5 * (hi - lo) * wt * vals[i] * vals[j];
                }
            }
        }
    }
    m
}

/// Largest deviation of the sum-factorised product from a dense Kronecker
/// oracle, for a jittered single-patch 2D space.
pub fn kronecker_check(name: &str, degree: usize, cells: usize, seed: u64) -> f64 {
    let pr = freeknot::problem(name).unwrap();
    let base = pr.uniform_space(degree, cells, 1).unwrap();
    let mut r = rng(seed);
    let sp = jittered(&base, &mut r, 0.3);
    assert!(sp.n_dofs() <= 100);
    let form = pr.form();
    let op = assemble(&sp, &form, &freeknot::assembly::AssemblyOptions::default()).unwrap();
    let patch = sp.patch(0);
    let dom = sp.domain();
    let mats = |order: usize| -> Vec<Vec<Vec<f64>>> {
        (0..2)
            .map(|t| naive_matrix_1d(patch.knots(t).as_slice(), patch.degree(t), order, dom[t]))
            .collect()
    };
    let m0 = mats(0);
    let m1 = mats(1);
    let n = sp.n_dofs();
    let idx: Vec<Vec<usize>> = (0..n).map(|f| sp.multi_index(f).1).collect();
    let w: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
    let got = op.apply(&w);
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let mut v = 0.0;
        for j in 0..n {
            let mut a = 0.0;
            for term in &form.bilinear {
                let mut prod = 1.0;
                for t in 0..2 {
                    let m = if term[t].order == 0 { &m0 } else { &m1 };
                    prod *= m[t][idx[i][t]][idx[j][t]];
                }
                a += prod;
            }
            v += a * w[j];
        }
        worst = worst.max((v - got[i]).abs());
    }
    worst
}

/// `approx1d` with the quadratic target `x^2 - 0.3 x`, exactly representable
/// for every degree >= 2, so the uniform start is already optimal.
pub fn polynomial_target() -> ProblemSpec {
    use freeknot::problems::{Factor1D, SeparableFunction};
    let mut pr = freeknot::problem("approx1d").unwrap();
    pr.target = SeparableFunction {
        factors: vec![vec![Factor1D::new(|x| x * x - 0.3 * x, |x| 2.0 * x - 0.3)]],
    };
    pr.closed_form = std::sync::Arc::new(|x| x[0] * x[0] - 0.3 * x[0]);
    pr
}
