//! Convergence studies: configuration, learning-rate sweeps and CSV output.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::constraints::{FeasibleSet, DEFAULT_H_MIN};
use crate::energy_opt::{minimise_sweep, solve_weights, MinimiseOutcome, OptimConfig, TraceRow, DEFAULT_LEARNING_RATES};
use crate::error::{Error, Result};
use crate::problems::{problem, ProblemSpec};
use crate::space::MultiPatchSpace;

/// Columns of the summary and sweep files.
pub const SUMMARY_HEADER: &str = "experiment,degree,patches,n_dofs,n_free_knots,lr,iters,energy,err_energy_uniform,err_energy_adapted,err_l2_uniform,err_l2_adapted,wall_s";

/// Columns of the per-run trace files.
pub const TRACE_HEADER: &str = "iter,energy,best_energy,displacement,cross_patch_h,cg_iters,cg_residual,knots";

/// One study over degrees and sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: String,
    pub degrees: Vec<usize>,
    /// Patches per axis.
    pub patches: usize,
    /// Cells per patch and axis.
    pub sizes: Vec<usize>,
    pub lrs: Vec<f64>,
    pub seed: u64,
    /// Relative amplitude of a random perturbation of the starting knots.
    pub jitter: f64,
    pub max_iters: Option<usize>,
    /// Skip the knot optimisation and report uniform errors only.
    pub uniform_only: bool,
    pub output: PathBuf,
    pub traces: bool,
    /// Record wall-clock seconds; off keeps the summary reproducible bit for bit.
    pub timing: bool,
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            problem: "approx1d".into(),
            degrees: vec![1, 2, 3],
            patches: 1,
            sizes: vec![16, 32, 64],
            lrs: DEFAULT_LEARNING_RATES.to_vec(),
            seed: 0,
            jitter: 0.0,
            max_iters: None,
            uniform_only: false,
            output: PathBuf::from("out"),
            traces: true,
            timing: false,
            threads: 1,
        }
    }
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| Error::Parse(format!("{key}: bad entry '{s}'"))))
        .collect()
}

fn parse_one<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("{key}: bad value '{value}'")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        v => Err(Error::Parse(format!("{key}: bad flag '{v}'"))),
    }
}

impl RunConfig {
    /// Reads `key = value` lines; `#` starts a comment, lists are comma separated.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: expected key = value", n + 1)))?;
            cfg.set(k.trim(), v.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Sets one key; the same keys are accepted in files and on the command line.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "problem" => self.problem = value.to_string(),
            "degrees" => self.degrees = parse_list(key, value)?,
            "patches" => self.patches = parse_one(key, value)?,
            "sizes" => self.sizes = parse_list(key, value)?,
            "lr" | "lrs" => self.lrs = parse_list(key, value)?,
            "seed" => self.seed = parse_one(key, value)?,
            "jitter" => self.jitter = parse_one(key, value)?,
            "max_iters" => self.max_iters = Some(parse_one(key, value)?),
            "uniform_only" => self.uniform_only = parse_bool(key, value)?,
            "output" => self.output = PathBuf::from(value),
            "traces" => self.traces = parse_bool(key, value)?,
            "timing" => self.timing = parse_bool(key, value)?,
            "threads" => self.threads = parse_one(key, value)?,
            _ => return Err(Error::Parse(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        problem(&self.problem)?;
        if self.lrs.is_empty() {
            return Err(Error::Parse("lr list is empty".into()));
        }
        if self.lrs.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(Error::Parse("learning rates must be positive".into()));
        }
        if self.degrees.is_empty() || self.sizes.is_empty() {
            return Err(Error::Parse("degrees and sizes must be nonempty".into()));
        }
        if self.patches == 0 || self.sizes.contains(&0) {
            return Err(Error::Parse("patches and sizes must be positive".into()));
        }
        if !(self.jitter >= 0.0 && self.jitter < 0.5) {
            return Err(Error::Parse("jitter must lie in [0, 0.5)".into()));
        }
        Ok(())
    }
}

/// One line of the summary or sweep file. Empty optional fields mark skipped
/// configurations or runs without optimisation.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRecord {
    pub experiment: String,
    pub degree: usize,
    pub patches: usize,
    pub n_dofs: usize,
    pub n_free_knots: usize,
    pub lr: Option<f64>,
    pub iters: Option<usize>,
    pub energy: Option<f64>,
    pub err_energy_uniform: Option<f64>,
    pub err_energy_adapted: Option<f64>,
    pub err_l2_uniform: Option<f64>,
    pub err_l2_adapted: Option<f64>,
    pub wall_s: f64,
}

fn opt<T: std::fmt::LowerExp>(v: &Option<T>) -> String {
    v.as_ref().map_or(String::new(), |x| format!("{x:e}"))
}

fn parse_opt<T: std::str::FromStr>(s: &str) -> Result<Option<T>> {
    if s.is_empty() {
        Ok(None)
    } else {
        s.parse().map(Some).map_err(|_| Error::Parse(format!("bad field '{s}'")))
    }
}

impl ConvergenceRecord {
    pub fn skipped(&self) -> bool {
        self.energy.is_none()
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.experiment,
            self.degree,
            self.patches,
            self.n_dofs,
            self.n_free_knots,
            opt(&self.lr),
            self.iters.map_or(String::new(), |i| i.to_string()),
            opt(&self.energy),
            opt(&self.err_energy_uniform),
            opt(&self.err_energy_adapted),
            opt(&self.err_l2_uniform),
            opt(&self.err_l2_adapted),
            self.wall_s
        )
    }

    pub fn parse_row(line: &str) -> Result<Self> {
        let f: Vec<&str> = line.trim().split(',').collect();
        if f.len() != 13 {
            return Err(Error::Parse(format!("expected 13 fields, found {}", f.len())));
        }
        let num = |s: &str| -> Result<usize> { s.parse().map_err(|_| Error::Parse(format!("bad integer '{s}'"))) };
        Ok(ConvergenceRecord {
            experiment: f[0].to_string(),
            degree: num(f[1])?,
            patches: num(f[2])?,
            n_dofs: num(f[3])?,
            n_free_knots: num(f[4])?,
            lr: parse_opt(f[5])?,
            iters: parse_opt(f[6])?,
            energy: parse_opt(f[7])?,
            err_energy_uniform: parse_opt(f[8])?,
            err_energy_adapted: parse_opt(f[9])?,
            err_l2_uniform: parse_opt(f[10])?,
            err_l2_adapted: parse_opt(f[11])?,
            wall_s: f[12].parse().map_err(|_| Error::Parse(format!("bad wall time '{}'", f[12])))?,
        })
    }
}

/// Reads a summary or sweep file.
pub fn read_records(path: &Path) -> Result<Vec<ConvergenceRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == SUMMARY_HEADER => {}
        _ => return Err(Error::Parse(format!("{}: missing header", path.display()))),
    }
    lines.filter(|l| !l.trim().is_empty()).map(ConvergenceRecord::parse_row).collect()
}

/// Trace of one optimisation run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub name: String,
    pub rows: Vec<TraceRow>,
}

impl RunTrace {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(TRACE_HEADER);
        s.push('\n');
        for r in &self.rows {
            let knots: Vec<String> = r.knots.iter().map(|k| format!("{k:e}")).collect();
            let _ = writeln!(
                s,
                "{},{:e},{:e},{:e},{:e},{},{:e},{}",
                r.iter,
                r.energy,
                r.best_energy,
                r.displacement,
                r.cross_patch_h,
                r.cg_iters,
                r.cg_residual,
                knots.join(";")
            );
        }
        s
    }

    pub fn parse_csv(name: &str, text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some(TRACE_HEADER) {
            return Err(Error::Parse(format!("{name}: missing trace header")));
        }
        let bad = |s: &str| Error::Parse(format!("{name}: bad field '{s}'"));
        let mut rows = Vec::new();
        for l in lines.filter(|l| !l.trim().is_empty()) {
            let f: Vec<&str> = l.trim().split(',').collect();
            if f.len() != 8 {
                return Err(Error::Parse(format!("{name}: expected 8 fields")));
            }
            let x = |s: &str| s.parse::<f64>().map_err(|_| bad(s));
            let knots = if f[7].is_empty() {
                Vec::new()
            } else {
                f[7].split(';').map(x).collect::<Result<_>>()?
            };
            rows.push(TraceRow {
                iter: f[0].parse().map_err(|_| bad(f[0]))?,
                energy: x(f[1])?,
                best_energy: x(f[2])?,
                displacement: x(f[3])?,
                cross_patch_h: x(f[4])?,
                cg_iters: f[5].parse().map_err(|_| bad(f[5]))?,
                cg_residual: x(f[6])?,
                knots,
            });
        }
        Ok(RunTrace {
            name: name.to_string(),
            rows,
        })
    }
}

/// Everything produced by [`run_study`].
#[derive(Debug, Clone, Default)]
pub struct StudyOutcome {
    /// Best learning rate per degree and size.
    pub summary: Vec<ConvergenceRecord>,
    /// Every learning rate.
    pub sweep: Vec<ConvergenceRecord>,
    pub traces: Vec<RunTrace>,
    /// Messages of runs that ended on a solver failure.
    pub aborted: Vec<String>,
    pub skipped: Vec<String>,
}

fn starting_space(pr: &ProblemSpec, uniform: &MultiPatchSpace, cfg: &RunConfig, degree: usize, size: usize) -> Result<MultiPatchSpace> {
    if cfg.jitter == 0.0 {
        return Ok(uniform.clone());
    }
    let mix = cfg.seed ^ ((degree as u64) << 32) ^ (size as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    let mut rng = ChaCha8Rng::seed_from_u64(mix);
    let h = pr
        .domain
        .iter()
        .map(|(a, b)| (b - a) / (cfg.patches * size) as f64)
        .fold(f64::INFINITY, f64::min);
    let xi: Vec<f64> = uniform
        .knot_params()
        .iter()
        .map(|x| x + cfg.jitter * h * rng.random_range(-1.0..1.0))
        .collect();
    let proj = FeasibleSet::from_space(uniform, DEFAULT_H_MIN).project(&xi)?;
    uniform.with_knot_params(&proj)
}

fn trace_name(problem: &str, degree: usize, size: usize, lr: f64) -> String {
    format!("{problem}_p{degree}_n{size}_lr{lr:e}")
}

/// Runs every (degree, size) configuration over the learning-rate sweep.
///
/// Configurations rejected by the degree gate are reported as skipped rows.
pub fn run_study(cfg: &RunConfig) -> Result<StudyOutcome> {
    cfg.validate()?;
    let pr = problem(&cfg.problem)?;
    let form = pr.form();
    let mut out = StudyOutcome::default();
    for &degree in &cfg.degrees {
        for &size in &cfg.sizes {
            let started = Instant::now();
            let uniform = pr.uniform_space(degree, size, cfg.patches)?;
            let mut base = ConvergenceRecord {
                experiment: pr.name.clone(),
                degree,
                patches: uniform.n_patches(),
                n_dofs: uniform.n_dofs(),
                n_free_knots: uniform.n_free_knots(),
                lr: None,
                iters: None,
                energy: None,
                err_energy_uniform: None,
                err_energy_adapted: None,
                err_l2_uniform: None,
                err_l2_adapted: None,
                wall_s: 0.0,
            };
            let optimise = !cfg.uniform_only && cfg.max_iters != Some(0);
            if optimise {
                if let Err(e) = pr.degree_gate(&uniform) {
                    log::info!("skipping p={degree} n={size}: {e}");
                    out.skipped.push(format!("p={degree} n={size}: {e}"));
                    out.summary.push(base);
                    continue;
                }
            }
            let (w_u, e_u) = solve_weights(&uniform, &form, crate::assembly::DATA_TOL)?;
            base.err_energy_uniform = Some(pr.energy_error(&uniform, &w_u));
            base.err_l2_uniform = Some(pr.l2_error(&uniform, &w_u));
            if !optimise {
                base.iters = Some(0);
                base.energy = Some(e_u);
                if cfg.timing {
                    base.wall_s = started.elapsed().as_secs_f64();
                }
                out.summary.push(base);
                continue;
            }
            let start = starting_space(&pr, &uniform, cfg, degree, size)?;
            let mut ocfg = OptimConfig::for_space(&start, cfg.lrs[0]);
            if let Some(m) = cfg.max_iters {
                ocfg.max_iters = m;
            }
            let (best, runs) = minimise_sweep(&start, &form, &ocfg, &cfg.lrs, cfg.threads.max(1))?;
            let record = |run: &MinimiseOutcome, wall: f64| {
                let mut r = base.clone();
                r.lr = Some(run.lr);
                r.iters = Some(run.iterations);
                r.energy = Some(run.energy);
                r.err_energy_adapted = Some(pr.energy_error(&run.space, &run.weights));
                r.err_l2_adapted = Some(pr.l2_error(&run.space, &run.weights));
                r.wall_s = wall;
                r
            };
            for run in &runs {
                out.sweep.push(record(run, 0.0));
                if let Some(msg) = &run.aborted {
                    out.aborted.push(format!("p={degree} n={size} lr={}: {msg}", run.lr));
                }
                if cfg.traces {
                    out.traces.push(RunTrace {
                        name: trace_name(&pr.name, degree, size, run.lr),
                        rows: run.trace.clone(),
                    });
                }
            }
            let wall = if cfg.timing { started.elapsed().as_secs_f64() } else { 0.0 };
            out.summary.push(record(&runs[best], wall));
            log::info!(
                "p={degree} n={size}: best lr {} energy {:e}",
                runs[best].lr,
                runs[best].energy
            );
        }
    }
    Ok(out)
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Renders records with the header.
pub fn records_csv(records: &[ConvergenceRecord]) -> String {
    let mut s = String::from(SUMMARY_HEADER);
    s.push('\n');
    for r in records {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    s
}

/// Writes `summary.csv`, `sweep.csv` and `traces/*.csv` under `dir`.
pub fn write_study(dir: &Path, out: &StudyOutcome) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_file(&dir.join("summary.csv"), &records_csv(&out.summary))?;
    write_file(&dir.join("sweep.csv"), &records_csv(&out.sweep))?;
    if !out.traces.is_empty() {
        let td = dir.join("traces");
        fs::create_dir_all(&td).map_err(|e| Error::io(&td, e))?;
        for t in &out.traces {
            write_file(&td.join(format!("{}.csv", t.name)), &t.to_csv())?;
        }
    }
    Ok(())
}

/// Least-squares slope of `log(err)` against `log(n)`.
pub fn loglog_slope(n: &[f64], err: &[f64]) -> f64 {
    let x: Vec<f64> = n.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = err.iter().map(|v| v.ln()).collect();
    let k = x.len() as f64;
    let mx = x.iter().sum::<f64>() / k;
    let my = y.iter().sum::<f64>() / k;
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}
