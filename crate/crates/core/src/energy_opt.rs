//! Energy evaluation, its knot gradient, conjugate gradients and the
//! projected ADAM loop over the knots.

use rayon::prelude::*;

use crate::assembly::{
    assemble, bilinear_entry_dknot, contract_except, mode_apply, AssembledOperator, AssemblyOptions, Block1D,
    SeparableForm, DATA_TOL,
};
use crate::constraints::{FeasibleSet, DEFAULT_H_MIN};
use crate::error::{Error, Result};
use crate::space::MultiPatchSpace;

/// Learning rates tried by [`minimise_sweep`] by default.
pub const DEFAULT_LEARNING_RATES: [f64; 8] = [1e-1, 5e-2, 2e-2, 1e-2, 5e-3, 2e-3, 1e-3, 5e-4];

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `K(W) = 1/2 W^T A W - F^T W`.
pub fn energy(op: &AssembledOperator, w: &[f64]) -> f64 {
    let aw = op.apply(w);
    0.5 * dot(w, &aw) - dot(&op.rhs(), w)
}

/// Outcome of [`cg_solve`].
#[derive(Debug, Clone, PartialEq)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// `||A x - F|| / ||F||` from the recursive residual.
    pub rel_residual: f64,
    pub converged: bool,
}

/// Conjugate gradients for `A x = rhs` from `x0` until `||r|| <= tol ||rhs||`.
pub fn cg_solve<A: Fn(&[f64]) -> Vec<f64>>(apply: A, rhs: &[f64], x0: &[f64], tol: f64, max_iters: usize) -> Result<CgOutcome> {
    let n = rhs.len();
    let fnorm = norm(rhs);
    if fnorm == 0.0 {
        return Ok(CgOutcome {
            x: vec![0.0; n],
            iterations: 0,
            rel_residual: 0.0,
            converged: true,
        });
    }
    let mut x = x0.to_vec();
    let ax = apply(&x);
    let mut r: Vec<f64> = rhs.iter().zip(&ax).map(|(f, a)| f - a).collect();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    if !rr.is_finite() {
        return Err(Error::Divergence { iterations: 0 });
    }
    let mut it = 0;
    while it < max_iters && rr.sqrt() > tol * fnorm {
        let ap = apply(&p);
        let pap = dot(&p, &ap);
        if !pap.is_finite() {
            return Err(Error::Divergence { iterations: it });
        }
        if pap <= 0.0 {
            break;
        }
        let alpha = rr / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        if !rr_new.is_finite() {
            return Err(Error::Divergence { iterations: it });
        }
        let beta = rr_new / rr;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_new;
        it += 1;
    }
    let rel = rr.sqrt() / fnorm;
    Ok(CgOutcome {
        x,
        iterations: it,
        rel_residual: rel,
        converged: rel <= tol,
    })
}

/// Partial derivative of `K(W, xi)` with respect to the trainable knots at fixed `W`.
///
/// `op` must have been assembled with load derivatives.
pub fn grad_knots(space: &MultiPatchSpace, op: &AssembledOperator, w: &[f64]) -> Result<Vec<f64>> {
    let free = space.free_knots();
    let mut grad = vec![0.0; free.len()];
    let r = space.n_patches();
    let mut pos = 0;
    while pos < free.len() {
        let (s, t, _) = free[pos];
        let mut end = pos;
        while end < free.len() && free[end].0 == s && free[end].1 == t {
            end += 1;
        }
        let patch = space.patch(s);
        let p = patch.degree(t);
        let knots = patch.knots(t).as_slice();
        let interval = space.domain()[t];
        let ws = &w[space.patch_range(s)];
        let shape_s = op.shape(s).to_vec();
        // bilinear part
        for (term, orders) in op.bilinear_orders().iter().enumerate() {
            let k = orders[t];
            for s2 in 0..r {
                let Some((y, yshape)) = op.apply_pair(term, s, s2, w, Some(t)) else {
                    continue;
                };
                if op.block(s, s2, t, k).is_none() {
                    continue;
                }
                let m_mat = contract_except(ws, &shape_s, &y, &yshape, t);
                let other = space.patch(s2);
                let q = other.degree(t);
                let cknots = other.knots(t).as_slice();
                if s2 != s && p == k && q == k {
                    return Err(Error::NonDifferentiable(format!(
                        "patches {s} and {s2} have degree {p} with derivative order {k}"
                    )));
                }
                for (gi, &(_, _, m)) in free[pos..end].iter().enumerate() {
                    grad[pos + gi] += bilinear_knot_term(&m_mat, k, knots, p, cknots, q, interval, m, s == s2);
                }
            }
        }
        // linear part
        for term in 0..op.n_linear_terms() {
            let mut v = ws.to_vec();
            let mut shape = shape_s.clone();
            for t2 in 0..shape_s.len() {
                if t2 == t {
                    continue;
                }
                let vals = &op.load(term, s, t2).values;
                let row = Block1D {
                    rows: 1,
                    cols: vals.len(),
                    data: vals.clone(),
                };
                let (nv, ns) = mode_apply(&v, &shape, t2, &row);
                v = nv;
                shape = ns;
            }
            let load = op.load(term, s, t);
            if load.dknots.is_empty() {
                return Err(Error::Capability("operator assembled without load derivatives".into()));
            }
            for (gi, &(_, _, m)) in free[pos..end].iter().enumerate() {
                let lo = m.saturating_sub(p + 1);
                let hi = m.min(v.len() - 1);
                for j in lo..=hi {
                    grad[pos + gi] -= v[j] * load.dknots[j][m - j];
                }
            }
        }
        pos = end;
    }
    Ok(grad)
}

#[allow(clippy::too_many_arguments)]
fn bilinear_knot_term(
    m_mat: &Block1D,
    k: usize,
    knots: &[f64],
    p: usize,
    cknots: &[f64],
    q: usize,
    interval: (f64, f64),
    m: usize,
    same: bool,
) -> f64 {
    let g = knots[m];
    let nr = knots.len() - p - 1;
    let nc = cknots.len() - q - 1;
    let rows = |deg: usize, n: usize| m.saturating_sub(deg + 1)..(m + 1).min(n);
    let mut acc = 0.0;
    if same {
        // 1/2 sum M_il dA_il over entries whose row or column moves
        for i in 0..nr {
            let ri = (m >= i && m - i < p + 2).then(|| m - i);
            let rw = &knots[i..i + p + 2];
            for l in 0..nc {
                let ci = (m >= l && m - l < q + 2).then(|| m - l);
                if ri.is_none() && ci.is_none() {
                    continue;
                }
                let mv = m_mat.get(i, l);
                if mv == 0.0 {
                    continue;
                }
                let cw = &cknots[l..l + q + 2];
                if rw[p + 1] < cw[0] || cw[q + 1] < rw[0] {
                    continue;
                }
                acc += 0.5 * mv * bilinear_entry_dknot(k, rw, ri, cw, ci, interval, g);
            }
        }
    } else {
        for i in rows(p, nr) {
            let rw = &knots[i..i + p + 2];
            for l in 0..nc {
                let mv = m_mat.get(i, l);
                if mv == 0.0 {
                    continue;
                }
                let cw = &cknots[l..l + q + 2];
                if rw[p + 1] < cw[0] || cw[q + 1] < rw[0] {
                    continue;
                }
                acc += mv * bilinear_entry_dknot(k, rw, Some(m - i), cw, None, interval, g);
            }
        }
    }
    acc
}

/// ADAM moments. Moments persist across projections.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub steps: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            steps: 0,
            beta1: 0.9,
            beta2: 0.99,
            eps: 1e-8,
        }
    }

    /// Unprojected proposal `xi - lr * m_hat / (sqrt(v_hat) + eps)`.
    pub fn step(&mut self, xi: &[f64], grad: &[f64], lr: f64) -> Vec<f64> {
        self.steps += 1;
        let c1 = 1.0 - self.beta1.powi(self.steps as i32);
        let c2 = 1.0 - self.beta2.powi(self.steps as i32);
        let mut out = xi.to_vec();
        for i in 0..xi.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            out[i] -= lr * mh / (vh.sqrt() + self.eps);
        }
        out
    }
}

/// Warm-up schedule `(1 - exp(-t / 50)) * lr`.
pub fn scheduled_lr(lr: f64, t: usize) -> f64 {
    (1.0 - (-(t as f64) / 50.0).exp()) * lr
}

/// Settings of [`minimise`].
#[derive(Debug, Clone, PartialEq)]
pub struct OptimConfig {
    pub lr: f64,
    pub max_iters: usize,
    /// Stop once the knot displacement of one step falls below this times
    /// the warm-up factor of the step.
    pub early_stop_tol: f64,
    pub h_min: f64,
    pub cg_tol: f64,
    pub cg_max_iters: usize,
    /// Every this many iterations CG runs without the iteration cap.
    pub full_solve_every: usize,
    pub data_tol: f64,
}

impl OptimConfig {
    /// Defaults for a space of dimension `dim` with `n_dofs` weights.
    pub fn for_space(space: &MultiPatchSpace, lr: f64) -> Self {
        Self {
            lr,
            max_iters: if space.n_dofs() > 1000 { 3000 } else { 1000 },
            early_stop_tol: if space.dim() == 1 { 1e-6 } else { 1e-4 },
            h_min: DEFAULT_H_MIN,
            cg_tol: 1e-12,
            cg_max_iters: 100,
            full_solve_every: 25,
            data_tol: DATA_TOL,
        }
    }
}

/// One row of the optimisation trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub energy: f64,
    pub best_energy: f64,
    pub displacement: f64,
    /// Smallest cross-patch knot distance over all axes.
    pub cross_patch_h: f64,
    pub cg_iters: usize,
    pub cg_residual: f64,
    pub knots: Vec<f64>,
}

/// Result of [`minimise`].
#[derive(Debug, Clone)]
pub struct MinimiseOutcome {
    pub space: MultiPatchSpace,
    pub weights: Vec<f64>,
    pub energy: f64,
    pub best_iter: usize,
    pub iterations: usize,
    pub early_stopped: bool,
    /// Set when the run ended on a solver failure; the best snapshot is still returned.
    pub aborted: Option<String>,
    pub lr: f64,
    pub trace: Vec<TraceRow>,
}

/// Full-precision weights for a fixed space.
pub fn solve_weights(space: &MultiPatchSpace, form: &SeparableForm, data_tol: f64) -> Result<(Vec<f64>, f64)> {
    let opts = AssemblyOptions {
        data_tol,
        load_derivatives: false,
    };
    let op = assemble(space, form, &opts)?;
    let rhs = op.rhs();
    let n = op.n_dofs();
    let cg = cg_solve(|x| op.apply(x), &rhs, &vec![0.0; n], 1e-12, 20 * n + 200)?;
    let e = energy(&op, &cg.x);
    Ok((cg.x, e))
}

/// Alternates weight solves and projected ADAM steps on the knots, keeping the
/// iterate with the lowest energy.
pub fn minimise(space: &MultiPatchSpace, form: &SeparableForm, cfg: &OptimConfig) -> Result<MinimiseOutcome> {
    let feasible = FeasibleSet::from_space(space, cfg.h_min);
    let opts = AssemblyOptions {
        data_tol: cfg.data_tol,
        load_derivatives: true,
    };
    let mut xi = space.knot_params();
    let mut cur = space.clone();
    let mut w = vec![0.0; space.n_dofs()];
    let mut adam = AdamState::new(xi.len());
    let mut best: Option<(MultiPatchSpace, Vec<f64>, f64, usize)> = None;
    let mut trace = Vec::new();
    let mut early = false;
    let mut aborted = None;
    let mut iterations = 0;
    let full_cap = 20 * space.n_dofs() + 200;
    for t in 0..cfg.max_iters {
        iterations = t + 1;
        let op = assemble(&cur, form, &opts)?;
        let rhs = op.rhs();
        let cap = if t % cfg.full_solve_every.max(1) == 0 { full_cap } else { cfg.cg_max_iters };
        let cg = match cg_solve(|x| op.apply(x), &rhs, &w, cfg.cg_tol, cap) {
            Ok(c) => c,
            Err(e) => {
                aborted = Some(e.to_string());
                break;
            }
        };
        w = cg.x;
        let e = energy(&op, &w);
        if !e.is_finite() {
            aborted = Some(format!("non-finite energy at iteration {t}"));
            break;
        }
        if best.as_ref().is_none_or(|b| e < b.2) {
            best = Some((cur.clone(), w.clone(), e, t));
        }
        let g = grad_knots(&cur, &op, &w)?;
        if g.iter().any(|v| !v.is_finite()) {
            aborted = Some(format!("non-finite knot gradient at iteration {t}"));
            break;
        }
        let proposal = adam.step(&xi, &g, scheduled_lr(cfg.lr, t));
        let next = match feasible.project(&proposal) {
            Ok(v) => v,
            Err(e) => {
                aborted = Some(e.to_string());
                break;
            }
        };
        let disp = norm(&next.iter().zip(&xi).map(|(a, b)| a - b).collect::<Vec<_>>());
        let cross = (0..cur.dim()).map(|a| cur.cross_patch_mesh_size(a)).fold(f64::INFINITY, f64::min);
        trace.push(TraceRow {
            iter: t,
            energy: e,
            best_energy: best.as_ref().map_or(e, |b| b.2),
            displacement: disp,
            cross_patch_h: cross,
            cg_iters: cg.iterations,
            cg_residual: cg.rel_residual,
            knots: xi.clone(),
        });
        xi = next;
        cur = cur.with_knot_params(&xi)?;
        // Warm-up shrinks the first steps by the scheduler factor; undo it so
        // small learning rates are not stopped before they start moving.
        if t >= 1 && disp < cfg.early_stop_tol * scheduled_lr(1.0, t) {
            early = true;
            break;
        }
    }
    let Some((bspace, mut bw, mut be, bt)) = best else {
        return Err(Error::Divergence { iterations: 0 });
    };
    // The loop's weights may come from a capped solve.
    if let Ok((w_full, e_full)) = solve_weights(&bspace, form, cfg.data_tol) {
        if e_full <= be {
            bw = w_full;
            be = e_full;
        }
    }
    Ok(MinimiseOutcome {
        space: bspace,
        weights: bw,
        energy: be,
        best_iter: bt,
        iterations,
        early_stopped: early,
        aborted,
        lr: cfg.lr,
        trace,
    })
}

/// Runs [`minimise`] for each learning rate and returns the run with the lowest
/// energy (first one on ties) together with all runs.
///
/// Runs execute on `threads` workers; the choice does not depend on timing.
pub fn minimise_sweep(
    space: &MultiPatchSpace,
    form: &SeparableForm,
    base: &OptimConfig,
    lrs: &[f64],
    threads: usize,
) -> Result<(usize, Vec<MinimiseOutcome>)> {
    let run = |lr: &f64| {
        let cfg = OptimConfig { lr: *lr, ..base.clone() };
        minimise(space, form, &cfg)
    };
    let results: Vec<Result<MinimiseOutcome>> = if threads > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Capability(e.to_string()))?;
        pool.install(|| lrs.par_iter().map(run).collect())
    } else {
        lrs.iter().map(run).collect()
    };
    let runs: Vec<MinimiseOutcome> = results.into_iter().collect::<Result<_>>()?;
    if runs.is_empty() {
        return Err(Error::Capability("empty learning-rate sweep".into()));
    }
    let mut best = 0;
    for (i, r) in runs.iter().enumerate() {
        if r.energy < runs[best].energy {
            best = i;
        }
    }
    Ok((best, runs))
}
