//! Dense brute-force QP oracle for a single knot chain: enumerate every
//! active set, solve the equality-constrained least-squares problem and
//! keep the best feasible point.

use freeknot::constraints::ChainConstraints;
use freeknot::space::BoundaryMode;
use nalgebra::{DMatrix, DVector};
use rand::Rng;

struct Row {
    coef: Vec<(usize, f64)>,
    rhs: f64,
}

fn rows(c: &ChainConstraints, n: usize) -> (Vec<Row>, Vec<Row>) {
    let mut ineq = Vec::new();
    let mut eq = Vec::new();
    for i in 0..n {
        if let Some(v) = c.fixed[i] {
            eq.push(Row { coef: vec![(i, 1.0)], rhs: v });
            continue;
        }
        if c.lower[i].is_finite() {
            ineq.push(Row { coef: vec![(i, 1.0)], rhs: c.lower[i] });
        }
        if c.upper[i].is_finite() {
            ineq.push(Row { coef: vec![(i, -1.0)], rhs: -c.upper[i] });
        }
    }
    for i in 0..n.saturating_sub(1) {
        // Repeated fixed knots carry no gap constraint.
        if c.fixed[i].is_some() && c.fixed[i + 1].is_some() {
            continue;
        }
        ineq.push(Row {
            coef: vec![(i + 1, 1.0), (i, -1.0)],
            rhs: c.h_min,
        });
    }
    (eq, ineq)
}

fn value(r: &Row, x: &[f64]) -> f64 {
    r.coef.iter().map(|&(i, a)| a * x[i]).sum()
}

/// Minimiser of `|x - cand|^2` over the chain constraints, or `None` if no
/// active set yields a feasible point. Only meant for small chains.
pub fn brute_force(c: &ChainConstraints, cand: &[f64]) -> Option<Vec<f64>> {
    let n = cand.len();
    let (eq, ineq) = rows(c, n);
    assert!(ineq.len() <= 20, "too many constraints for enumeration");
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 0u32..(1 << ineq.len()) {
        let active: Vec<&Row> = eq
            .iter()
            .chain(ineq.iter().enumerate().filter(|(k, _)| mask >> k & 1 == 1).map(|(_, r)| r))
            .collect();
        if active.len() > n {
            continue;
        }
        let m = active.len();
        let x = if m == 0 {
            cand.to_vec()
        } else {
            let mut a = DMatrix::zeros(m, n);
            let mut d = DVector::zeros(m);
            for (k, r) in active.iter().enumerate() {
                for &(i, v) in &r.coef {
                    a[(k, i)] = v;
                }
                d[k] = r.rhs;
            }
            let c0 = DVector::from_column_slice(cand);
            let g = &a * a.transpose();
            let Some(lambda) = g.lu().solve(&(d - &a * &c0)) else {
                continue;
            };
            let x = c0 + a.transpose() * lambda;
            if active.iter().any(|r| (value(r, x.as_slice()) - r.rhs).abs() > 1e-9) {
                continue;
            }
            x.as_slice().to_vec()
        };
        let feasible = ineq.iter().all(|r| value(r, &x) >= r.rhs - 1e-10);
        if !feasible {
            continue;
        }
        let obj: f64 = x.iter().zip(cand).map(|(u, v)| (u - v) * (u - v)).sum();
        if best.as_ref().is_none_or(|(b, _)| obj < *b) {
            best = Some((obj, x));
        }
    }
    best.map(|(_, x)| x)
}

/// Random chain with up to six free knots, optional fixed repeated ends and
/// a few extra bounds.
pub fn random_chain(r: &mut rand_chacha::ChaCha8Rng) -> (ChainConstraints, Vec<f64>) {
    let n = r.random_range(2..=6);
    let p = r.random_range(0..n);
    let mode = if r.random_bool(0.5) { BoundaryMode::Free } else { BoundaryMode::ZeroTrace };
    let h_min = r.random_range(0.0..0.15);
    let mut c = ChainConstraints::for_chain(n, p, (-1.0, 1.0), mode, h_min);
    if r.random_bool(0.3) {
        let i = r.random_range(0..n);
        c.lower[i] = c.lower[i].max(r.random_range(-1.0..0.0));
    }
    let mut cand: Vec<f64> = (0..n).map(|_| r.random_range(-4.0..4.0)).collect();
    if r.random_bool(0.3) {
        // Repeated fixed knots at both ends, as in the Poisson spaces.
        let full = n + 4;
        let mut lower = vec![f64::NEG_INFINITY; full];
        let mut upper = vec![f64::INFINITY; full];
        let mut fixed = vec![None; full];
        for i in 0..2 {
            fixed[i] = Some(-1.0);
            fixed[full - 1 - i] = Some(1.0);
        }
        lower[2] = -1.0;
        upper[full - 3] = 1.0;
        c = ChainConstraints {
            patch: 0,
            axis: 0,
            lower: std::mem::take(&mut lower),
            upper: std::mem::take(&mut upper),
            fixed,
            h_min: h_min.min(0.3),
        };
        cand = (0..full).map(|_| r.random_range(-2.0..2.0)).collect();
    }
    (c, cand)
}
