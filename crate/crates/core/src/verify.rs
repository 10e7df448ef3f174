//! Numerical checks of the B-spline bounds and continuity estimates, and of
//! differentiation under the integral sign.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assembly::{
    bilinear_block_1d, d_bilinear_dknot, linear_vector_1d, linear_with_dknots_1d, Coupling, LinearKernel,
};
use crate::bspline::{dknot_piece_at, window_piece_at};
use crate::error::{Error, Result};
use crate::knots::min_gap;
use crate::quadrature::{gauss_rule, BreakPartition};

/// Slack allowed on the ratio `lhs / rhs`.
pub const RATIO_SLACK: f64 = 1e-9;

/// Outcome of one inequality checked over many samples.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub lemma: String,
    pub degree: usize,
    pub samples: usize,
    pub max_ratio: f64,
    pub pass: bool,
}

impl BoundReport {
    fn new(lemma: impl Into<String>, degree: usize, samples: usize, max_ratio: f64) -> Self {
        BoundReport {
            lemma: lemma.into(),
            degree,
            samples,
            max_ratio,
            pass: max_ratio <= 1.0 + RATIO_SLACK,
        }
    }

    pub const CSV_HEADER: &'static str = "lemma,degree,samples,max_ratio,pass";

    pub fn csv_row(&self) -> String {
        format!("{},{},{},{:.12e},{}", self.lemma, self.degree, self.samples, self.max_ratio, self.pass)
    }
}

impl fmt::Display for BoundReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<24} p={:<2} samples={:<6} max_ratio={:<14.6e} {}",
            self.lemma,
            self.degree,
            self.samples,
            self.max_ratio,
            if self.pass { "PASS" } else { "FAIL" }
        )
    }
}

/// Aligned text table of reports.
pub fn format_table(reports: &[BoundReport]) -> String {
    let mut s = format!("{:<24} {:>3} {:>8} {:>14} {:>6}\n", "lemma", "p", "samples", "max_ratio", "result");
    for r in reports {
        s.push_str(&format!(
            "{:<24} {:>3} {:>8} {:>14.6e} {:>6}\n",
            r.lemma,
            r.degree,
            r.samples,
            r.max_ratio,
            if r.pass { "PASS" } else { "FAIL" }
        ));
    }
    s
}

/// Upper bound `(p + 1)^(-1/2)` for the constant `C_p`.
pub fn c_bound(p: usize) -> f64 {
    1.0 / ((p + 1) as f64).sqrt()
}

/// Sorted uniform draws on `[0, L]` with `L` in `[1, 10]`, redrawn until the
/// smallest gap is at least `h_min`.
pub fn sample_knots<R: Rng>(rng: &mut R, n: usize, h_min: f64) -> Result<Vec<f64>> {
    for _ in 0..1_000_000 {
        let l: f64 = rng.random_range(1.0..10.0);
        if (n as f64 - 1.0) * h_min > l {
            continue;
        }
        let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..l)).collect();
        v.sort_by(f64::total_cmp);
        if min_gap(&v) >= h_min {
            return Ok(v);
        }
    }
    Err(Error::Infeasible(format!("no {n} knots with gap {h_min} found by rejection")))
}

/// A pair of windows: every other pair is an independent draw, the rest are
/// small perturbations where the Lipschitz regime is tight.
fn sample_pair<R: Rng>(rng: &mut R, n: usize, h_min: f64, independent: bool) -> Result<(Vec<f64>, Vec<f64>)> {
    let tau = sample_knots(rng, n, h_min)?;
    if independent {
        return Ok((sample_knots(rng, n, h_min)?, tau));
    }
    loop {
        let scale = 10f64.powf(rng.random_range(-6.0..-1.0)) * min_gap(&tau);
        let mut sigma: Vec<f64> = tau.clone();
        let k = rng.random_range(0..=n);
        if k < n {
            sigma[k] += scale * rng.random_range(-1.0..1.0);
        } else {
            for s in &mut sigma {
                *s += scale * rng.random_range(-1.0..1.0);
            }
        }
        if sigma.windows(2).all(|w| w[0] < w[1]) && min_gap(&sigma) >= h_min {
            return Ok((sigma, tau));
        }
    }
}

/// Exact `L2` norm of `f - g` for piecewise polynomials of degree `<= deg`
/// whose breaks are all in `breaks`. `f` and `g` get `(x, cell midpoint)`.
fn l2_diff<F, G>(breaks: &[f64], deg: usize, f: F, g: G) -> f64
where
    F: Fn(f64, f64) -> f64,
    G: Fn(f64, f64) -> f64,
{
    let (lo, hi) = breaks.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let part = BreakPartition::new(breaks.iter().copied(), lo, hi);
    let rule = gauss_rule(deg + 1).expect("degree bounded");
    let mut s = 0.0;
    for (a, b) in part.cells() {
        let y = 0.5 * (a + b);
        for (x, w) in rule.mapped(a, b) {
            let d = f(x, y) - g(x, y);
            s += w * d * d;
        }
    }
    s.sqrt()
}

fn l2<F: Fn(f64, f64) -> f64>(breaks: &[f64], deg: usize, f: F) -> f64 {
    l2_diff(breaks, deg, f, |_, _| 0.0)
}

fn ratio(lhs: f64, rhs: f64) -> f64 {
    if lhs == 0.0 {
        0.0
    } else {
        lhs / rhs
    }
}

/// Bounds on `B_p`, `D B_p`, `d_i B_p` and `d_i D B_p` in `L2`.
///
/// Only the checks whose degree precondition holds are returned.
pub fn check_boundedness(p: usize, samples: usize, h_min: f64, seed: u64) -> Result<Vec<BoundReport>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = [0.0f64; 4];
    for _ in 0..samples {
        let t = sample_knots(&mut rng, p + 2, h_min)?;
        let h = min_gap(&t);
        let width = t[p + 1] - t[0];
        let b = l2(&t, p, |x, y| window_piece_at(&t, 0, x, y));
        worst[0] = worst[0].max(ratio(b, c_bound(p) * width.sqrt()));
        if p >= 1 {
            let d = l2(&t, p, |x, y| window_piece_at(&t, 1, x, y));
            let bound = (2.0 * p as f64).sqrt() * c_bound(p - 1) / h.sqrt();
            worst[1] = worst[1].max(ratio(d, bound));
            let bound = (2.0 / p as f64).sqrt() * c_bound(p) / h.sqrt();
            for i in 0..p + 2 {
                let d = l2(&t, p, |x, y| dknot_piece_at(&t, i, 0, x, y));
                worst[2] = worst[2].max(ratio(d, bound));
            }
        }
        if p >= 2 {
            let bound = 2.0 * 2f64.sqrt() / (p - 1) as f64 * c_bound(p - 1) * h.powf(-1.5);
            for i in 0..p + 2 {
                let d = l2(&t, p, |x, y| dknot_piece_at(&t, i, 1, x, y));
                worst[3] = worst[3].max(ratio(d, bound));
            }
        }
    }
    let names = ["bounded/value", "bounded/dx", "bounded/dknot", "bounded/dknot_dx"];
    let active = [true, p >= 1, p >= 1, p >= 2];
    Ok((0..4)
        .filter(|&k| active[k])
        .map(|k| BoundReport::new(names[k], p, samples, worst[k]))
        .collect())
}

/// One continuity estimate on `D^k B_p` or `d_i D^k B_p`.
struct HolderCase {
    name: &'static str,
    k: usize,
    dknot: bool,
    exponent: f64,
    /// Bound with the factor `|sigma - tau|^exponent` removed.
    constant: Box<dyn Fn(f64) -> f64>,
}

fn holder_cases(p: usize) -> Vec<HolderCase> {
    let pf = p as f64;
    let mut v = Vec::new();
    match p {
        0 => v.push(HolderCase {
            name: "holder/value/p0",
            k: 0,
            dknot: false,
            exponent: 0.5,
            constant: Box::new(|_| 2.0 * c_bound(0)),
        }),
        _ => v.push(HolderCase {
            name: "holder/value",
            k: 0,
            dknot: false,
            exponent: 1.0,
            constant: Box::new(move |h| (2.0 * (pf + 1.0) / pf).sqrt() * c_bound(p) / h.sqrt()),
        }),
    }
    if p == 1 {
        v.push(HolderCase {
            name: "holder/dx/p1",
            k: 1,
            dknot: false,
            exponent: 0.5,
            constant: Box::new(|h| 4.0 * c_bound(0) / h),
        });
        v.push(HolderCase {
            name: "holder/dknot/p1",
            k: 0,
            dknot: true,
            exponent: 0.5,
            constant: Box::new(|h| 5.0 * c_bound(1) / h),
        });
    }
    if p >= 2 {
        v.push(HolderCase {
            name: "holder/dx",
            k: 1,
            dknot: false,
            exponent: 1.0,
            constant: Box::new(move |h| 2.0 * ((pf + 1.0) / (pf - 1.0)).sqrt() * c_bound(p - 1) * h.powf(-1.5)),
        });
        v.push(HolderCase {
            name: "holder/dknot",
            k: 0,
            dknot: true,
            exponent: 1.0,
            constant: Box::new(move |h| {
                2.0 / pf * ((2.0 * pf + 7.0) / (pf - 1.0)).sqrt() * c_bound(p) * h.powf(-1.5)
            }),
        });
    }
    if p == 2 {
        v.push(HolderCase {
            name: "holder/dknot_dx/p2",
            k: 1,
            dknot: true,
            exponent: 0.5,
            constant: Box::new(|h| 12.0 * c_bound(1) / (h * h)),
        });
    }
    if p >= 3 {
        v.push(HolderCase {
            name: "holder/dknot_dx",
            k: 1,
            dknot: true,
            exponent: 1.0,
            constant: Box::new(move |h| {
                4.0 / (pf - 1.0) * ((pf + 7.0) / (pf - 2.0)).sqrt() * c_bound(p - 1) * h.powf(-2.5)
            }),
        });
    }
    v
}

/// Right-hand side of a continuity estimate for the given distance and mesh size.
pub fn holder_rhs(p: usize, name: &str, dist: f64, h: f64) -> Option<f64> {
    holder_cases(p)
        .into_iter()
        .find(|c| c.name == name)
        .map(|c| (c.constant)(h) * dist.powf(c.exponent))
}

/// Continuity of `B_p` and its derivatives in the knots, over random pairs.
pub fn check_holder(p: usize, samples: usize, h_min: f64, seed: u64) -> Result<Vec<BoundReport>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cases = holder_cases(p);
    let mut worst = vec![0.0f64; cases.len()];
    for n in 0..samples {
        let (s, t) = sample_pair(&mut rng, p + 2, h_min, n % 2 == 0)?;
        let h = min_gap(&s).min(min_gap(&t));
        let dist = s.iter().zip(&t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let breaks: Vec<f64> = s.iter().chain(&t).copied().collect();
        for (c, w) in cases.iter().zip(worst.iter_mut()) {
            let rhs = (c.constant)(h) * dist.powf(c.exponent);
            let knots = if c.dknot { 0..p + 2 } else { 0..1 };
            for i in knots {
                let lhs = if c.dknot {
                    l2_diff(
                        &breaks,
                        p,
                        |x, y| dknot_piece_at(&s, i, c.k, x, y),
                        |x, y| dknot_piece_at(&t, i, c.k, x, y),
                    )
                } else {
                    l2_diff(&breaks, p, |x, y| window_piece_at(&s, c.k, x, y), |x, y| window_piece_at(&t, c.k, x, y))
                };
                *w = w.max(ratio(lhs, rhs));
            }
        }
    }
    Ok(cases
        .iter()
        .zip(worst)
        .map(|(c, w)| BoundReport::new(c.name, p, samples, w))
        .collect())
}

/// Relative agreement required between the derivative of an integral and
/// the integral of the derivative.
pub const INTERCHANGE_TOL: f64 = 1e-5;
const INTERCHANGE_EPS: f64 = 1e-6;
const INTERCHANGE_DATA_TOL: f64 = 1e-13;

fn random_smooth<R: Rng>(rng: &mut R) -> LinearKernel {
    let c0: f64 = rng.random_range(-1.0..1.0);
    let terms: Vec<(f64, f64, f64)> = (0..3)
        .map(|_| (rng.random_range(-1.0..1.0), rng.random_range(0.2..3.0), rng.random_range(0.0..6.3)))
        .collect();
    LinearKernel {
        data: Arc::new(move |x| c0 + terms.iter().map(|(a, w, ph)| a * (w * x + ph).sin()).sum::<f64>()),
        order: 0,
    }
}

/// Worst relative mismatch over [`INTERCHANGE_TOL`]. Entries are compared
/// relative to at least a thousandth of the largest derivative or integral,
/// since the difference quotient cannot resolve less.
fn agreement(a: &[f64], b: &[f64], values: &[f64]) -> f64 {
    let big = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let scale = 1e-3 * big(a).max(big(b)).max(big(values));
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / (INTERCHANGE_TOL * x.abs().max(y.abs()).max(scale).max(1e-300)))
        .fold(0.0, f64::max)
}

/// Derivatives of load vectors and bilinear blocks with respect to a knot
/// against central differences of the integrals, for random smooth data and
/// random feasible knots. The ratio is the relative mismatch over
/// [`INTERCHANGE_TOL`].
pub fn check_interchange(p: usize, samples: usize, h_min: f64, seed: u64) -> Result<Vec<BoundReport>> {
    if p == 0 {
        return Ok(Vec::new());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = [0.0f64; 4];
    for _ in 0..samples {
        let t = sample_knots(&mut rng, p + 4, h_min.max(0.05))?;
        let n = t.len();
        let (lo, hi) = (t[0] - 0.5, t[n - 1] + 0.5);
        let mut ends = [rng.random_range(lo..hi), rng.random_range(lo..hi)];
        ends.sort_by(f64::total_cmp);
        let interval = (ends[0], ends[1]);
        let m = rng.random_range(0..n);
        let eps = INTERCHANGE_EPS;
        // A knot within eps of an interval end sits on a kink of the integral.
        if (t[m] - interval.0).abs() < 1e3 * eps || (t[m] - interval.1).abs() < 1e3 * eps {
            continue;
        }
        let mut tp = t.clone();
        let mut tm = t.clone();
        tp[m] += eps;
        tm[m] -= eps;
        let kern = random_smooth(&mut rng);
        for (slot, k) in [(0usize, 0usize), (1, 1)] {
            if k >= p {
                continue;
            }
            let kern = LinearKernel { order: k, ..kern.clone() };
            let all = linear_with_dknots_1d(&kern, &t, p, interval, INTERCHANGE_DATA_TOL);
            let exact: Vec<f64> = (0..all.values.len())
                .map(|j| if m >= j && m - j < p + 2 { all.dknots[j][m - j] } else { 0.0 })
                .collect();
            let fp = linear_vector_1d(&kern, &tp, p, interval, INTERCHANGE_DATA_TOL);
            let fm = linear_vector_1d(&kern, &tm, p, interval, INTERCHANGE_DATA_TOL);
            let fd: Vec<f64> = fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * eps)).collect();
            worst[slot] = worst[slot].max(agreement(&exact, &fd, &all.values));
        }
        for (slot, k) in [(2usize, 0usize), (3, 1)] {
            if k >= p {
                continue;
            }
            let d = d_bilinear_dknot(k, &t, p, &t, p, interval, m, Coupling::Shared)?;
            let ap = bilinear_block_1d(k, &tp, p, &tp, p, interval);
            let am = bilinear_block_1d(k, &tm, p, &tm, p, interval);
            let fd: Vec<f64> = ap.data.iter().zip(&am.data).map(|(a, b)| (a - b) / (2.0 * eps)).collect();
            worst[slot] = worst[slot].max(agreement(&d.data, &fd, &ap.data));
        }
    }
    let names = ["interchange/load", "interchange/load_dx", "interchange/mass", "interchange/stiffness"];
    let active = [true, p >= 2, true, p >= 2];
    Ok((0..4)
        .filter(|&k| active[k])
        .map(|k| BoundReport::new(names[k], p, samples, worst[k]))
        .collect())
}
