//! Benchmark problems, their separable data, degree gates and error metrics.

use std::sync::Arc;

use crate::assembly::{BilinearKernel, Factor, LinearKernel, SeparableForm};
use crate::error::{Error, Result};
use crate::quadrature::adaptive_gauss;
use crate::space::{BoundaryMode, MultiPatchSpace};

/// Which energy the problem minimises.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    /// `1/2 ||u - f||^2` (L2 projection).
    Approximation,
    /// `1/2 a(u, u) - l(u)` with `a(u, v) = int grad u . grad v`, zero trace.
    Poisson,
}

/// A one-dimensional factor with its derivative.
#[derive(Clone)]
pub struct Factor1D {
    pub value: Factor,
    pub deriv: Factor,
}

impl Factor1D {
    pub fn new(
        value: impl Fn(f64) -> f64 + Send + Sync + 'static,
        deriv: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            value: Arc::new(value),
            deriv: Arc::new(deriv),
        }
    }
}

/// `sum_r prod_t factors[r][t](x_t)`.
#[derive(Clone)]
pub struct SeparableFunction {
    pub factors: Vec<Vec<Factor1D>>,
}

impl SeparableFunction {
    pub fn rank(&self) -> usize {
        self.factors.len()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.factors
            .iter()
            .map(|term| term.iter().zip(x).map(|(f, &xi)| (f.value)(xi)).product::<f64>())
            .sum()
    }

    /// Partial derivative along `axis`.
    pub fn partial(&self, x: &[f64], axis: usize) -> f64 {
        self.factors
            .iter()
            .map(|term| {
                term.iter()
                    .zip(x)
                    .enumerate()
                    .map(|(t, (f, &xi))| if t == axis { (f.deriv)(xi) } else { (f.value)(xi) })
                    .product::<f64>()
            })
            .sum()
    }
}

/// A benchmark problem.
#[derive(Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub kind: ProblemKind,
    pub domain: Vec<(f64, f64)>,
    /// Target `f` for approximation, exact solution `u*` for Poisson.
    pub target: SeparableFunction,
    /// Closed-form scalar definition of the target.
    pub closed_form: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
}

impl std::fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("name", &self.name)
            .field("kind", &self.kind)
            .field("domain", &self.domain)
            .field("rank", &self.target.rank())
            .finish()
    }
}

/// Names accepted by [`problem`].
pub const PROBLEM_NAMES: &[&str] = &[
    "approx1d",
    "approx1d-smooth",
    "poisson1d",
    "poisson1d-smooth",
    "approx2d",
    "poisson2d-tanh",
    "poisson2d-peak",
];

fn sech2(x: f64) -> f64 {
    let c = x.cosh();
    if c.is_finite() {
        1.0 / (c * c)
    } else {
        0.0
    }
}

fn f1(v: impl Fn(f64) -> f64 + Send + Sync + 'static, d: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Factor1D {
    Factor1D::new(v, d)
}


/// `(x^2 - 1) tanh(c sin(x - 0.3))`.
fn tanh_sine(c: f64) -> Factor1D {
    f1(
        move |x| (x * x - 1.0) * (c * (x - 0.3).sin()).tanh(),
        move |x| {
            let s = c * (x - 0.3).sin();
            2.0 * x * s.tanh() + (x * x - 1.0) * c * (x - 0.3).cos() * sech2(s)
        },
    )
}

/// Looks up a problem by name.
pub fn problem(name: &str) -> Result<ProblemSpec> {
    let d1 = vec![(-1.0, 1.0)];
    let d2 = vec![(-1.0, 1.0), (-1.0, 1.0)];
    let spec = match name {
        "approx1d" => {
            let eps = 0.01;
            let f = move |x: f64| {
                let s = (2.0 * x + 0.4).sin();
                s * s / (s * s + eps).sqrt()
            };
            let df = move |x: f64| {
                let s = (2.0 * x + 0.4).sin();
                let ds = 2.0 * (2.0 * x + 0.4).cos();
                let q = s * s + eps;
                ds * s * (s * s + 2.0 * eps) / q.powf(1.5)
            };
            ProblemSpec {
                name: name.into(),
                kind: ProblemKind::Approximation,
                domain: d1,
                target: SeparableFunction {
                    factors: vec![vec![f1(f, df)]],
                },
                closed_form: Arc::new(move |x: &[f64]| {
                    let s = (2.0 * x[0] + 0.4).sin();
                    s * (s / (s * s + eps).sqrt())
                }),
            }
        }
        "approx1d-smooth" => ProblemSpec {
            name: name.into(),
            kind: ProblemKind::Approximation,
            domain: d1,
            target: SeparableFunction {
                factors: vec![vec![f1(|x| (2.0 * x + 0.4).sin(), |x| 2.0 * (2.0 * x + 0.4).cos())]],
            },
            closed_form: Arc::new(|x: &[f64]| (2.0 * x[0] + 0.4).sin()),
        },
        "poisson1d" | "poisson1d-smooth" => {
            let c = if name == "poisson1d" { 100.0 } else { 2.0 };
            ProblemSpec {
                name: name.into(),
                kind: ProblemKind::Poisson,
                domain: d1,
                target: SeparableFunction {
                    factors: vec![vec![tanh_sine(c)]],
                },
                closed_form: Arc::new(move |x: &[f64]| (x[0] * x[0] - 1.0) * (c * (x[0] - 0.3).sin()).tanh()),
            }
        }
        "approx2d" => {
            let alpha: f64 = 5.0;
            let mut factors = Vec::new();
            for k in 0..=10i32 {
                let coef = (2.0f64 * alpha).powi(k) / (1..=k).map(f64::from).product::<f64>();
                let gx = move |x: f64| (std::f64::consts::PI * x + 1.0).cos();
                let dgx = move |x: f64| -std::f64::consts::PI * (std::f64::consts::PI * x + 1.0).sin();
                // e^{-a g^2} g^k and its derivative via the chain rule
                let phi = move |g: f64| (-alpha * g * g).exp() * g.powi(k);
                let dphi = move |g: f64| {
                    let e = (-alpha * g * g).exp();
                    let lower = if k > 0 { f64::from(k) * g.powi(k - 1) } else { 0.0 };
                    e * (lower - 2.0 * alpha * g.powi(k + 1))
                };
                let fx = f1(move |x| coef * phi(gx(x)), move |x| coef * dphi(gx(x)) * dgx(x));
                let fy = f1(move |y| phi(3.0 * y), move |y| 3.0 * dphi(3.0 * y));
                factors.push(vec![fx, fy]);
            }
            ProblemSpec {
                name: name.into(),
                kind: ProblemKind::Approximation,
                domain: d2,
                target: SeparableFunction { factors },
                closed_form: Arc::new(move |x: &[f64]| {
                    let g = (std::f64::consts::PI * x[0] + 1.0).cos();
                    let h = 3.0 * x[1];
                    let z = 2.0 * alpha * g * h;
                    let mut s = 0.0;
                    let mut term = 1.0;
                    for k in 0..=10 {
                        if k > 0 {
                            term *= z / k as f64;
                        }
                        s += term;
                    }
                    (-alpha * (g * g + h * h)).exp() * s
                }),
            }
        }
        "poisson2d-tanh" => {
            let bubble = |v: Arc<dyn Fn(f64) -> f64 + Send + Sync>, dv: Arc<dyn Fn(f64) -> f64 + Send + Sync>| {
                let (v2, dv2) = (v.clone(), dv);
                f1(move |x| (1.0 - x * x) * v(x), move |x| -2.0 * x * v2(x) + (1.0 - x * x) * dv2(x))
            };
            let m = |c: f64, s: f64| -> (Arc<dyn Fn(f64) -> f64 + Send + Sync>, Arc<dyn Fn(f64) -> f64 + Send + Sync>) {
                (
                    Arc::new(move |x: f64| 1.0 - (c * (x - s)).tanh()),
                    Arc::new(move |x: f64| -c * sech2(c * (x - s))),
                )
            };
            let p = |c: f64, s: f64| -> (Arc<dyn Fn(f64) -> f64 + Send + Sync>, Arc<dyn Fn(f64) -> f64 + Send + Sync>) {
                (
                    Arc::new(move |x: f64| (c * (x - s)).tanh()),
                    Arc::new(move |x: f64| c * sech2(c * (x - s))),
                )
            };
            let (a1, da1) = m(20.0, 0.3);
            let (b1, db1) = m(50.0, -0.3);
            let (a2, da2) = p(50.0, -0.7);
            let (b2, db2) = m(20.0, 0.6);
            ProblemSpec {
                name: name.into(),
                kind: ProblemKind::Poisson,
                domain: d2,
                target: SeparableFunction {
                    factors: vec![vec![bubble(a1, da1), bubble(b1, db1)], vec![bubble(a2, da2), bubble(b2, db2)]],
                },
                closed_form: Arc::new(|x: &[f64]| {
                    let (x, y) = (x[0], x[1]);
                    let v = (1.0 - (20.0 * (x - 0.3)).tanh()) * (1.0 - (50.0 * (y + 0.3)).tanh())
                        + (50.0 * (x + 0.7)).tanh() * (1.0 - (20.0 * (y - 0.6)).tanh());
                    (1.0 - x * x) * (1.0 - y * y) * v
                }),
            }
        }
        "poisson2d-peak" => {
            let ex = |x: f64| (x * x - 1.0) * (-3.0 * (x + 0.3) * (x + 0.3)).exp();
            let dex = |x: f64| (2.0 * x - 6.0 * (x + 0.3) * (x * x - 1.0)) * (-3.0 * (x + 0.3) * (x + 0.3)).exp();
            let ey = |y: f64| (y * y - 1.0) * (-(y - 0.5) * (y - 0.5)).exp();
            let dey = |y: f64| (2.0 * y - 2.0 * (y - 0.5) * (y * y - 1.0)) * (-(y - 0.5) * (y - 0.5)).exp();
            ProblemSpec {
                name: name.into(),
                kind: ProblemKind::Poisson,
                domain: d2,
                target: SeparableFunction {
                    factors: vec![
                        vec![
                            f1(move |x| ex(x) * x.cos(), move |x| dex(x) * x.cos() - ex(x) * x.sin()),
                            f1(move |y| ey(y) * y.cos(), move |y| dey(y) * y.cos() - ey(y) * y.sin()),
                        ],
                        vec![
                            f1(move |x| -ex(x) * x.sin(), move |x| -dex(x) * x.sin() - ex(x) * x.cos()),
                            f1(move |y| ey(y) * y.sin(), move |y| dey(y) * y.sin() + ey(y) * y.cos()),
                        ],
                    ],
                },
                closed_form: Arc::new(|x: &[f64]| {
                    let (x, y) = (x[0], x[1]);
                    (x * x - 1.0)
                        * (y * y - 1.0)
                        * (-3.0 * (x + 0.3) * (x + 0.3) - (y - 0.5) * (y - 0.5)).exp()
                        * (x + y).cos()
                }),
            }
        }
        _ => return Err(Error::UnknownProblem(name.into())),
    };
    Ok(spec)
}

impl ProblemSpec {
    pub fn dim(&self) -> usize {
        self.domain.len()
    }

    /// Bilinear and linear forms of the energy.
    pub fn form(&self) -> SeparableForm {
        let d = self.dim();
        match self.kind {
            ProblemKind::Approximation => SeparableForm {
                bilinear: vec![vec![BilinearKernel { order: 0 }; d]],
                linear: self
                    .target
                    .factors
                    .iter()
                    .map(|term| {
                        term.iter()
                            .map(|f| LinearKernel {
                                data: f.value.clone(),
                                order: 0,
                            })
                            .collect()
                    })
                    .collect(),
            },
            ProblemKind::Poisson => {
                let mut bilinear = Vec::new();
                let mut linear = Vec::new();
                for t0 in 0..d {
                    bilinear.push((0..d).map(|t| BilinearKernel { order: usize::from(t == t0) }).collect());
                    for term in &self.target.factors {
                        linear.push(
                            term.iter()
                                .enumerate()
                                .map(|(t, f)| {
                                    if t == t0 {
                                        LinearKernel {
                                            data: f.deriv.clone(),
                                            order: 1,
                                        }
                                    } else {
                                        LinearKernel {
                                            data: f.value.clone(),
                                            order: 0,
                                        }
                                    }
                                })
                                .collect(),
                        );
                    }
                }
                SeparableForm { bilinear, linear }
            }
        }
    }

    /// Uniform starting space of the matching boundary mode.
    pub fn uniform_space(&self, degree: usize, cells: usize, patches_per_axis: usize) -> Result<MultiPatchSpace> {
        match self.kind {
            ProblemKind::Approximation => MultiPatchSpace::init_uniform_approx(&self.domain, degree, cells, patches_per_axis),
            ProblemKind::Poisson => MultiPatchSpace::init_uniform_poisson(&self.domain, degree, cells, patches_per_axis),
        }
    }

    /// Rejects configurations whose energy is not differentiable in the knots.
    pub fn degree_gate(&self, space: &MultiPatchSpace) -> Result<()> {
        let p = space.min_degree();
        let multi = space.n_patches() > 1;
        let need = match (self.kind, multi) {
            (ProblemKind::Approximation, true) => 1,
            (ProblemKind::Approximation, false) => 0,
            (ProblemKind::Poisson, true) => 2,
            (ProblemKind::Poisson, false) => 1,
        };
        if p < need {
            return Err(Error::Capability(format!(
                "{} with {} patch(es) needs degree >= {need}, got {p}",
                self.name,
                space.n_patches()
            )));
        }
        let expected = match self.kind {
            ProblemKind::Approximation => BoundaryMode::Free,
            ProblemKind::Poisson => BoundaryMode::ZeroTrace,
        };
        if space.mode() != expected {
            return Err(Error::Capability(format!("{} needs a {expected:?} space", self.name)));
        }
        Ok(())
    }

    /// `a(u*, u*)`, or `||f||^2` for approximation.
    pub fn exact_energy_norm_sq(&self) -> f64 {
        let d = self.dim();
        let orders: Vec<Vec<usize>> = match self.kind {
            ProblemKind::Approximation => vec![vec![0; d]],
            ProblemKind::Poisson => (0..d).map(|t0| (0..d).map(|t| usize::from(t == t0)).collect()).collect(),
        };
        let fs = &self.target.factors;
        let mut total = 0.0;
        for o in &orders {
            for a in fs {
                for b in fs {
                    let mut prod = 1.0;
                    for t in 0..d {
                        let (fa, fb) = if o[t] == 1 {
                            (&a[t].deriv, &b[t].deriv)
                        } else {
                            (&a[t].value, &b[t].value)
                        };
                        let (lo, hi) = self.domain[t];
                        let breaks: Vec<f64> = (0..=16).map(|i| lo + (hi - lo) * i as f64 / 16.0).collect();
                        prod *= adaptive_gauss(|x| fa(x) * fb(x), &breaks, 1e-15, 1e-13).value;
                    }
                    total += prod;
                }
            }
        }
        total
    }

    /// Minimal energy `-1/2 a(u*, u*)`.
    pub fn exact_energy(&self) -> f64 {
        -0.5 * self.exact_energy_norm_sq()
    }

    /// L2 error of the spline `w` on `space`.
    pub fn l2_error(&self, space: &MultiPatchSpace, w: &[f64]) -> f64 {
        integrate_domain(space, |x| {
            let e = space.realise(w, x) - self.target.eval(x);
            e * e
        })
        .max(0.0)
        .sqrt()
    }

    /// Error in the energy norm (L2 for approximation, H1 seminorm for Poisson).
    pub fn energy_error(&self, space: &MultiPatchSpace, w: &[f64]) -> f64 {
        match self.kind {
            ProblemKind::Approximation => self.l2_error(space, w),
            ProblemKind::Poisson => integrate_domain(space, |x| {
                let g = space.realise_grad(w, x);
                g.iter()
                    .enumerate()
                    .map(|(t, v)| {
                        let e = v - self.target.partial(x, t);
                        e * e
                    })
                    .sum()
            })
            .max(0.0)
            .sqrt(),
        }
    }
}

/// Nested adaptive integration over the domain, split at every knot.
fn integrate_domain<F: Fn(&[f64]) -> f64>(space: &MultiPatchSpace, f: F) -> f64 {
    let d = space.dim();
    let breaks: Vec<Vec<f64>> = (0..d)
        .map(|t| {
            let (lo, hi) = space.domain()[t];
            let mut v: Vec<f64> = space
                .patches()
                .iter()
                .flat_map(|p| p.knots(t).as_slice().iter().copied())
                .filter(|&x| x > lo && x < hi)
                .collect();
            v.push(lo);
            v.push(hi);
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            v.dedup();
            v
        })
        .collect();
    let mut x = vec![0.0; d];
    nested(&f, &breaks, 0, &mut x)
}

fn nested<F: Fn(&[f64]) -> f64>(f: &F, breaks: &[Vec<f64>], level: usize, x: &mut Vec<f64>) -> f64 {
    if level == breaks.len() {
        return f(x);
    }
    adaptive_gauss(
        |y| {
            x[level] = y;
            nested(f, breaks, level + 1, x)
        },
        &breaks[level],
        1e-18,
        1e-10,
    )
    .value
}
