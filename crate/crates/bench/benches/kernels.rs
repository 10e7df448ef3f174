use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use freeknot::assembly::{assemble, AssemblyOptions};
use freeknot::bspline::span_ders;
use freeknot::constraints::FeasibleSet;
use freeknot::energy_opt::{grad_knots, solve_weights};
use freeknot::problem;

fn bench_span_ders(c: &mut Criterion) {
    let knots: Vec<f64> = (0..40).map(|i| i as f64 * 0.1).collect();
    for p in [1usize, 3, 5] {
        c.bench_function(&format!("span_ders p{p}"), |b| {
            b.iter(|| span_ders(black_box(&knots), p, 18, black_box(1.83), 2))
        });
    }
}

fn bench_assemble(c: &mut Criterion) {
    for (name, p, n) in [("approx1d", 3, 64), ("approx2d", 2, 10), ("poisson2d-peak", 2, 8)] {
        let pr = problem(name).unwrap();
        let sp = pr.uniform_space(p, n, 1).unwrap();
        let form = pr.form();
        let opts = AssemblyOptions {
            data_tol: 1e-12,
            load_derivatives: true,
        };
        c.bench_function(&format!("assemble {name} p{p} n{n}"), |b| {
            b.iter(|| assemble(black_box(&sp), &form, &opts).unwrap())
        });
        let op = assemble(&sp, &form, &opts).unwrap();
        let w = vec![0.5; sp.n_dofs()];
        c.bench_function(&format!("apply {name} p{p} n{n}"), |b| b.iter(|| op.apply(black_box(&w))));
    }
}

fn bench_grad_knots(c: &mut Criterion) {
    for (name, p, n) in [("approx1d", 3, 64), ("approx2d", 2, 10)] {
        let pr = problem(name).unwrap();
        let sp = pr.uniform_space(p, n, 1).unwrap();
        let form = pr.form();
        let (w, _) = solve_weights(&sp, &form, 1e-12).unwrap();
        let op = assemble(
            &sp,
            &form,
            &AssemblyOptions {
                data_tol: 1e-12,
                load_derivatives: true,
            },
        )
        .unwrap();
        c.bench_function(&format!("grad_knots {name} p{p} n{n}"), |b| {
            b.iter(|| grad_knots(&sp, &op, black_box(&w)).unwrap())
        });
    }
}

fn bench_projection(c: &mut Criterion) {
    let pr = problem("approx1d").unwrap();
    let sp = pr.uniform_space(3, 256, 1).unwrap();
    let fs = FeasibleSet::from_space(&sp, 1e-6);
    let cand: Vec<f64> = sp
        .knot_params()
        .iter()
        .enumerate()
        .map(|(i, x)| x + 0.02 * ((i * 7919 % 13) as f64 - 6.0))
        .collect();
    c.bench_function("project approx1d p3 n256", |b| b.iter(|| fs.project(black_box(&cand)).unwrap()));
}

criterion_group!(benches, bench_span_ders, bench_assemble, bench_grad_knots, bench_projection);
criterion_main!(benches);
