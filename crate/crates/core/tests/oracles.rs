mod support;

use approx::assert_abs_diff_eq;
use freeknot::assembly::{
    assemble, bilinear_block_1d, bilinear_entry_dknot, d_bilinear_dknot, d_linear_dknot, linear_vector_1d,
    AssemblyOptions, Coupling, LinearKernel,
};
use freeknot::bspline::{divided_difference, LocalKnots};
use freeknot::constraints::{ChainConstraints, FeasibleSet, DEFAULT_H_MIN};
use freeknot::energy_opt::{cg_solve, energy, grad_knots, scheduled_lr, AdamState};
use freeknot::knots::joint_min_mesh_size;
use freeknot::quadrature::{adaptive_simpson, gauss_rule};
use freeknot::space::{BoundaryMode, MultiPatchSpace};
use freeknot::{problem, Error, KnotVector};
use std::sync::Arc;
use support::*;

fn kv(v: &[f64]) -> KnotVector {
    KnotVector::new(v.to_vec()).unwrap()
}

fn local(p: usize, t: &[f64]) -> LocalKnots {
    LocalKnots::from_slice(p, t).unwrap()
}

#[test]
fn drop_operators_commute() {
    let t = kv(&[0.0, 1.0, 2.0, 3.0]);
    let a = t.drop_last().unwrap().drop_first().unwrap();
    let b = t.drop_first().unwrap().drop_last().unwrap();
    assert_eq!(a.as_slice(), &[1.0, 2.0]);
    assert_eq!(a, b);
}

#[test]
fn joint_mesh_size() {
    let a = kv(&[0.0, 0.5, 1.0]);
    let b = kv(&[0.0, 0.25, 1.0]);
    assert_eq!(joint_min_mesh_size(&[&a, &b]), 0.25);
}

#[test]
fn divided_differences_of_square() {
    let sq = |y: f64, r: usize| match r {
        0 => Some(y * y),
        1 => Some(2.0 * y),
        2 => Some(2.0),
        _ => Some(0.0),
    };
    assert_abs_diff_eq!(divided_difference(&[0.0, 0.0], sq).unwrap(), 0.0);
    assert_abs_diff_eq!(divided_difference(&[0.0, 1.0, 2.0], sq).unwrap(), 1.0, epsilon = 1e-15);
}

#[test]
fn hand_values() {
    assert_eq!(local(0, &[0.0, 1.0]).eval(0.5), 1.0);
    assert_abs_diff_eq!(local(2, &[0.0, 1.0, 2.0, 3.0]).eval(1.5), 0.75, epsilon = 1e-15);
    assert_abs_diff_eq!(local(1, &[1.0, 1.0, 2.0]).eval(1.5), 0.5, epsilon = 1e-15);
    let hat = local(1, &[0.0, 1.0, 2.0]);
    assert_abs_diff_eq!(hat.eval_dx(0.5, 1).unwrap(), 1.0, epsilon = 1e-15);
    assert_abs_diff_eq!(hat.eval_dx(1.5, 1).unwrap(), -1.0, epsilon = 1e-15);
}

#[test]
fn normalised_integral() {
    let hat = local(1, &[0.0, 1.0, 2.0]);
    let n = gauss_rule(4).unwrap();
    let v = n.integrate(0.0, 1.0, |x| hat.normalised(x).unwrap()) + n.integrate(1.0, 2.0, |x| hat.normalised(x).unwrap());
    assert_abs_diff_eq!(v, 0.5, epsilon = 1e-15);
}

#[test]
fn matches_naive_recursion() {
    let mut r = rng(1);
    for p in 0..=5 {
        for _ in 0..20 {
            let t = random_knots(&mut r, p + 2, 0.05);
            let b = local(p, &t);
            for k in 0..=40 {
                let x = t[0] - 0.1 + (t[p + 1] - t[0] + 0.2) * k as f64 / 40.0;
                assert_abs_diff_eq!(b.eval(x), naive_bspline(&t, p, x), epsilon = 1e-13);
            }
        }
    }
}

#[test]
fn knot_derivative_hand_values() {
    let hat = local(1, &[0.0, 1.0, 2.0]);
    assert_abs_diff_eq!(hat.eval_dknot(1, 1.5).unwrap(), 0.5, epsilon = 1e-14);
    assert_abs_diff_eq!(hat.eval_dknot(0, 1.5).unwrap(), 0.0, epsilon = 1e-14);
    // Independent check by moving the middle knot.
    let eps = 1e-7;
    let fd = (naive_bspline(&[0.0, 1.0 + eps, 2.0], 1, 1.5) - naive_bspline(&[0.0, 1.0 - eps, 2.0], 1, 1.5)) / (2.0 * eps);
    assert_abs_diff_eq!(fd, 0.5, epsilon = 1e-8);
    assert!(matches!(local(0, &[0.0, 1.0]).eval_dknot(0, 0.5), Err(Error::DistributionalValue(_))));
}

#[test]
fn mixed_derivative_matches_fd() {
    let t = [0.0, 1.0, 2.0, 3.0];
    let b = local(2, &t);
    let eps = 1e-6;
    for &x in &[0.3, 1.2, 1.7, 2.6] {
        let mut tp = t;
        let mut tm = t;
        tp[1] += eps;
        tm[1] -= eps;
        let fd = (local(2, &tp).eval_dx(x, 1).unwrap() - local(2, &tm).eval_dx(x, 1).unwrap()) / (2.0 * eps);
        let v = b.eval_dknot_dx(1, x).unwrap();
        assert!(close(v, fd, 1e-6, 1e-12), "x={x}: {v} vs {fd}");
    }
}

#[test]
fn cubic_is_c1_at_knots() {
    let t = [0.0, 1.0, 2.0, 3.0, 4.0];
    let b = local(3, &t);
    for &g in &[1.0, 2.0, 3.0] {
        for i in 0..5 {
            let l = b.eval_dknot(i, g - 1e-12).unwrap();
            let r = b.eval_dknot(i, g).unwrap();
            assert_abs_diff_eq!(l, r, epsilon = 1e-9);
        }
    }
}

#[test]
fn quadrature_hand_values() {
    let g = gauss_rule(2).unwrap();
    let s = 1.0 / 3f64.sqrt();
    assert_abs_diff_eq!(g.nodes[0].abs(), s, epsilon = 1e-15);
    assert_abs_diff_eq!(g.nodes[1].abs(), s, epsilon = 1e-15);
    assert_abs_diff_eq!(g.weights[0], 1.0, epsilon = 1e-15);
    assert_abs_diff_eq!(g.weights[1], 1.0, epsilon = 1e-15);
    let r = adaptive_simpson(f64::sin, 0.0, std::f64::consts::PI, 1e-12);
    assert!((r.value - 2.0).abs() <= 1e-12);
    let hat = linear_vector_1d(&const_kernel(1.0), &[0.0, 1.0, 2.0], 1, (0.0, 2.0), 1e-12);
    assert_abs_diff_eq!(hat[0], 1.0, epsilon = 1e-13);
}

fn const_kernel(c: f64) -> LinearKernel {
    LinearKernel {
        data: Arc::new(move |_| c),
        order: 0,
    }
}

#[test]
fn l1_identity_integral() {
    let mut r = rng(2);
    for p in 0..=5 {
        let t = random_knots(&mut r, p + 2, 0.05);
        let v = linear_vector_1d(&const_kernel(1.0), &t, p, (t[0] - 1.0, t[p + 1] + 1.0), 1e-13);
        assert_abs_diff_eq!(v[0], (t[p + 1] - t[0]) / (p + 1) as f64, epsilon = 1e-12);
    }
}

#[test]
fn space_dimensions() {
    let sp = MultiPatchSpace::init_uniform_approx(&[(-1.0, 1.0), (-1.0, 1.0)], 2, 3, 1).unwrap();
    assert_eq!(sp.patch(0).knots(0).len(), 8);
    assert_eq!(sp.n_dofs(), 25);
    assert_eq!(sp.n_free_knots(), 16);
    let sp = MultiPatchSpace::init_uniform_approx(&[(-1.0, 1.0)], 1, 3, 1).unwrap();
    let k = sp.patch(0).knots(0).as_slice();
    assert_eq!(k.len(), 6);
    assert_eq!(sp.n_dofs(), 4);
    assert_abs_diff_eq!(k[1], -1.0, epsilon = 1e-15);
    assert_abs_diff_eq!(k[4], 1.0, epsilon = 1e-15);
    let h = 2.0 / 3.0;
    for w in k.windows(2) {
        assert_abs_diff_eq!(w[1] - w[0], h, epsilon = 1e-14);
    }
    // One basis function per patch at the smallest size.
    let sp = MultiPatchSpace::init_uniform_approx(&[(-1.0, 1.0)], 2, 0, 3);
    assert!(sp.map(|s| s.n_dofs() == 3).unwrap_or(true));
}

#[test]
fn active_basis_by_hand() {
    let sp = MultiPatchSpace::new(
        vec![freeknot::PatchSpec::all_trainable(vec![1], vec![kv(&[0.0, 1.0, 2.0, 3.0, 4.0])]).unwrap()],
        vec![(0.0, 4.0)],
        BoundaryMode::Free,
    )
    .unwrap();
    assert_eq!(sp.active_basis(0, 0, 1.5), 0..2);
    let ones = vec![1.0; sp.n_dofs()];
    assert_abs_diff_eq!(sp.realise(&ones, &[2.5]), 1.0, epsilon = 1e-15);
}

#[test]
fn patch_overlap_and_repeated_ends() {
    let sp = MultiPatchSpace::init_uniform_approx(&[(-1.0, 1.0)], 2, 4, 2).unwrap();
    let a = sp.patch(0).knots(0).as_slice();
    let b = sp.patch(1).knots(0).as_slice();
    let shared = a.iter().filter(|x| b.iter().any(|y| (*x - y).abs() < 1e-14)).count();
    assert_eq!(shared, 3);

    let sp = MultiPatchSpace::init_uniform_poisson(&[(-1.0, 1.0)], 2, 4, 1).unwrap();
    let k = sp.patch(0).knots(0).as_slice();
    let n = k.len();
    assert_eq!(&k[..2], &[-1.0, -1.0]);
    assert_eq!(&k[n - 2..], &[1.0, 1.0]);
    assert_eq!(sp.patch(0).trainable(0)[0], false);
    assert_eq!(sp.n_free_knots(), n - 4);

    let sp = MultiPatchSpace::init_uniform_poisson(&[(-1.0, 1.0)], 2, 4, 2).unwrap();
    let a = sp.patch(0).knots(0).as_slice();
    let b = sp.patch(1).knots(0).as_slice();
    assert_eq!(a[0], a[1]);
    assert!(a[a.len() - 1] > a[a.len() - 2]);
    assert!(b[0] < b[1]);
    assert_eq!(b[b.len() - 1], b[b.len() - 2]);
}

#[test]
fn hat_mass_and_stiffness() {
    let h = 0.25;
    let t: Vec<f64> = (0..9).map(|i| i as f64 * h).collect();
    let m = bilinear_block_1d(0, &t, 1, &t, 1, (-1.0, 3.0));
    let s = bilinear_block_1d(1, &t, 1, &t, 1, (-1.0, 3.0));
    for i in 1..5 {
        assert_abs_diff_eq!(m.get(i, i), 2.0 * h / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.get(i, i + 1), h / 6.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.get(i, i), 2.0 / h, epsilon = 1e-13);
        assert_abs_diff_eq!(s.get(i, i + 1), -1.0 / h, epsilon = 1e-13);
    }
}

#[test]
fn load_of_basis_reproduces_mass_column() {
    let t = [0.0, 0.4, 1.1, 1.5, 2.3, 3.0];
    let p = 2;
    let m = bilinear_block_1d(0, &t, p, &t, p, (0.0, 3.0));
    for j in 0..t.len() - p - 1 {
        let win: Vec<f64> = t[j..j + p + 2].to_vec();
        let b = LocalKnots::from_slice(p, &win).unwrap();
        let kern = LinearKernel {
            data: Arc::new(move |x| b.eval(x)),
            order: 0,
        };
        let f = linear_vector_1d(&kern, &t, p, (0.0, 3.0), 1e-13);
        for i in 0..f.len() {
            assert_abs_diff_eq!(f[i], m.get(i, j), epsilon = 1e-10);
        }
    }
}

#[test]
fn bilinear_derivatives_match_fd() {
    let mut r = rng(3);
    let eps = 1e-6;
    for (k, p, q) in [(0, 1, 1), (0, 2, 3), (1, 2, 2), (1, 3, 2)] {
        for _ in 0..5 {
            let row = random_knots(&mut r, p + 6, 0.05);
            let col = if p == q { row.clone() } else { random_knots(&mut r, q + 6, 0.05) };
            let coupling = if p == q { Coupling::Shared } else { Coupling::Independent };
            let iv = (row[1], row[row.len() - 2]);
            for m in 0..row.len() {
                if (row[m] - iv.0).abs() < 1e-3 || (row[m] - iv.1).abs() < 1e-3 {
                    continue;
                }
                let d = d_bilinear_dknot(k, &row, p, &col, q, iv, m, coupling).unwrap();
                let shift = |s: f64| {
                    let mut rr = row.clone();
                    rr[m] += s;
                    let cc = if coupling == Coupling::Shared { rr.clone() } else { col.clone() };
                    bilinear_block_1d(k, &rr, p, &cc, q, iv)
                };
                let (ap, am) = (shift(eps), shift(-eps));
                let scale = 1e-3 * ap.data.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                for e in 0..d.data.len() {
                    let fd = (ap.data[e] - am.data[e]) / (2.0 * eps);
                    assert!(close(d.data[e], fd, 1e-5, scale), "k={k} p={p} q={q} m={m}: {} vs {fd}", d.data[e]);
                }
            }
        }
    }
}

#[test]
fn independent_hats_closed_form() {
    // int B1'((x,0,1)) B1'((y,0,1)) = 1 - max(x, y) / (x y) for x, y < 0.
    let value = |x: f64, y: f64| bilinear_block_1d(1, &[x, 0.0, 1.0], 1, &[y, 0.0, 1.0], 1, (-5.0, 5.0)).get(0, 0);
    for (x, y) in [(-1.0, -0.5), (-0.4, -0.9), (-2.0, -0.3)] {
        assert_abs_diff_eq!(value(x, y), 1.0 - f64::max(x, y) / (x * y), epsilon = 1e-13);
        let d = bilinear_entry_dknot(1, &[x, 0.0, 1.0], Some(0), &[y, 0.0, 1.0], None, (-5.0, 5.0), x);
        let expect = if x < y { 1.0 / (x * x) } else { 0.0 };
        assert_abs_diff_eq!(d, expect, epsilon = 1e-12);
    }
}

#[test]
fn load_derivative_of_constant() {
    let mut r = rng(4);
    for p in 1..=4 {
        let t = random_knots(&mut r, p + 2, 0.05);
        let iv = (t[0] - 1.0, t[p + 1] + 1.0);
        for i in 0..p + 2 {
            let d = d_linear_dknot(&const_kernel(1.0), &t, p, iv, i, 1e-13).unwrap()[0];
            let expect = match i {
                0 => -1.0 / (p + 1) as f64,
                i if i == p + 1 => 1.0 / (p + 1) as f64,
                _ => 0.0,
            };
            assert_abs_diff_eq!(d, expect, epsilon = 1e-12);
        }
    }
}

#[test]
fn load_derivatives_match_fd() {
    let mut r = rng(5);
    let eps = 1e-6;
    let kern = LinearKernel {
        data: Arc::new(|x: f64| (1.3 * x).sin() + 0.2 * x * x),
        order: 0,
    };
    for p in 1..=3 {
        let t = random_knots(&mut r, p + 5, 0.05);
        let iv = (t[1] - 0.01, t[t.len() - 2] + 0.02);
        for m in 0..t.len() {
            let d = d_linear_dknot(&kern, &t, p, iv, m, 1e-13).unwrap();
            let mut tp = t.clone();
            let mut tm = t.clone();
            tp[m] += eps;
            tm[m] -= eps;
            let fp = linear_vector_1d(&kern, &tp, p, iv, 1e-13);
            let fm = linear_vector_1d(&kern, &tm, p, iv, 1e-13);
            for j in 0..d.len() {
                let fd = (fp[j] - fm[j]) / (2.0 * eps);
                assert!(close(d[j], fd, 1e-5, 1e-6), "p={p} m={m} j={j}: {} vs {fd}", d[j]);
            }
        }
    }
}

#[test]
fn cg_two_by_two() {
    let a = |x: &[f64]| vec![2.0 * x[0] + x[1], x[0] + 2.0 * x[1]];
    let r = cg_solve(a, &[1.0, 1.0], &[0.0, 0.0], 1e-14, 10).unwrap();
    assert_abs_diff_eq!(r.x[0], 1.0 / 3.0, epsilon = 1e-14);
    assert_abs_diff_eq!(r.x[1], 1.0 / 3.0, epsilon = 1e-14);
}

fn constant_problem(c: f64) -> freeknot::ProblemSpec {
    let mut pr = problem("approx1d").unwrap();
    pr.target = freeknot::problems::SeparableFunction {
        factors: vec![vec![freeknot::problems::Factor1D::new(move |_| c, |_| 0.0)]],
    };
    pr.closed_form = Arc::new(move |_| c);
    pr
}

#[test]
fn constant_is_reproduced() {
    let pr = constant_problem(1.0);
    let sp = pr.uniform_space(2, 6, 1).unwrap();
    let op = assemble(&sp, &pr.form(), &AssemblyOptions::default()).unwrap();
    let ones = vec![1.0; sp.n_dofs()];
    assert_abs_diff_eq!(energy(&op, &ones), -1.0, epsilon = 1e-12);
}

#[test]
fn constant_target_has_no_knot_gradient() {
    let pr = constant_problem(0.7);
    let base = pr.uniform_space(2, 6, 1).unwrap();
    // Only knots strictly inside the domain move, so the basis still sums
    // to one on all of it and the constant stays exactly representable.
    let mut xi = base.knot_params();
    let n = xi.len();
    for (k, x) in xi.iter_mut().enumerate().take(n - 3).skip(3) {
        *x += 0.07 * ((k * 7 % 5) as f64 - 2.0);
    }
    let sp = base.with_knot_params(&xi).unwrap();
    // The constant weights are the exact minimiser; an iterative solve
    // would only add its own residual to the gradient.
    let w = vec![0.7; sp.n_dofs()];
    let op = assemble(
        &sp,
        &pr.form(),
        &AssemblyOptions {
            data_tol: 1e-13,
            load_derivatives: true,
        },
    )
    .unwrap();
    let g = grad_knots(&sp, &op, &w).unwrap();
    assert!(g.iter().all(|v| v.abs() <= 1e-8), "{g:?}");
}

#[test]
fn adam_hand_step() {
    assert_eq!(scheduled_lr(0.1, 0), 0.0);
    let mut a = AdamState::new(3);
    let x = [0.5, 1.0, 1.5];
    assert_eq!(a.step(&x, &[1.0; 3], scheduled_lr(0.1, 0)), x.to_vec());
    let y = a.step(&x, &[1.0; 3], scheduled_lr(0.1, 1));
    for (u, v) in y.iter().zip(&x) {
        assert_abs_diff_eq!(u - v, -scheduled_lr(0.1, 1) / (1.0 + 1e-8), epsilon = 1e-15);
    }
}

#[test]
fn constraint_hand_values() {
    let sp = MultiPatchSpace::init_uniform_approx(&[(-1.0, 1.0)], 1, 4, 1).unwrap();
    let fs = FeasibleSet::from_space(&sp, DEFAULT_H_MIN);
    let c = &fs.chains[0];
    assert_eq!(c.lower[0], -3.0);
    assert_eq!(c.upper[c.upper.len() - 1], 3.0);
    assert_eq!(DEFAULT_H_MIN, 1e-6);

    let mut chain = ChainConstraints::for_chain(2, 0, (-10.0, 10.0), BoundaryMode::ZeroTrace, 0.2);
    chain.lower = vec![f64::NEG_INFINITY; 2];
    chain.upper = vec![f64::INFINITY; 2];
    let x = chain.project(&[0.5, 0.5]).unwrap();
    assert_abs_diff_eq!(x[0], 0.4, epsilon = 1e-15);
    assert_abs_diff_eq!(x[1], 0.6, epsilon = 1e-15);
}

#[test]
fn degree_gates() {
    let p1 = problem("poisson1d-smooth").unwrap();
    let pa = problem("approx1d").unwrap();
    let multi = p1.uniform_space(1, 4, 4).unwrap();
    assert!(p1.degree_gate(&multi).is_err());
    assert!(p1.degree_gate(&p1.uniform_space(1, 4, 1).unwrap()).is_ok());
    assert!(pa.degree_gate(&pa.uniform_space(1, 4, 3).unwrap()).is_ok());
}

#[test]
fn separable_ranks() {
    assert_eq!(problem("approx2d").unwrap().target.rank(), 11);
    assert_eq!(problem("poisson2d-peak").unwrap().target.rank(), 2);
    assert!(problem("poisson2d-tanh").unwrap().target.rank() >= 2);
}

#[test]
fn separable_targets_match_closed_forms() {
    for name in freeknot::problems::PROBLEM_NAMES {
        let pr = problem(name).unwrap();
        let d = pr.dim();
        let n = if d == 1 { 2500 } else { 50 };
        for i in 0..n {
            let x: Vec<f64> = if d == 1 {
                vec![-1.0 + 2.0 * (i as f64 + 0.5) / n as f64]
            } else {
                (0..n).map(|j| j).take(1).map(|_| 0.0).collect::<Vec<_>>()
            };
            if d == 1 {
                assert_abs_diff_eq!(pr.target.eval(&x), (pr.closed_form)(&x), epsilon = 1e-12);
                continue;
            }
            for j in 0..n {
                let x = [-1.0 + 2.0 * (i as f64 + 0.5) / n as f64, -1.0 + 2.0 * (j as f64 + 0.5) / n as f64];
                assert_abs_diff_eq!(pr.target.eval(&x), (pr.closed_form)(&x), epsilon = 1e-12);
            }
        }
    }
}

#[test]
fn poisson_solutions_vanish_on_boundary() {
    for name in ["poisson1d", "poisson1d-smooth", "poisson2d-tanh", "poisson2d-peak"] {
        let pr = problem(name).unwrap();
        for i in 0..=40 {
            let s = -1.0 + i as f64 / 20.0;
            let pts: Vec<Vec<f64>> = if pr.dim() == 1 {
                vec![vec![-1.0], vec![1.0]]
            } else {
                vec![vec![-1.0, s], vec![1.0, s], vec![s, -1.0], vec![s, 1.0]]
            };
            for x in pts {
                assert!((pr.closed_form)(&x).abs() <= 1e-12, "{name} at {x:?}");
            }
        }
    }
}
