use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use freeknot::constraints::ChainConstraints;
use freeknot::experiment::{read_records, run_study, write_study, RunConfig, RunTrace};
use freeknot::plot::{convergence_svg, trajectory_svg, Metric};
use freeknot::verify::{check_boundedness, check_holder, check_interchange, format_table, BoundReport};
use freeknot::{problem, BoundaryMode};

/// Free-knot B-spline experiments.
#[derive(Parser)]
#[command(name = "freeknot", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convergence study with knot optimisation.
    Run(RunArgs),
    /// Numerical checks of the B-spline estimates.
    Verify(VerifyArgs),
    /// SVG plots from the output of `run`.
    Plot(PlotArgs),
    /// Projection of a knot vector onto the feasible set.
    ProjectTest(ProjectArgs),
}

#[derive(Args)]
struct RunArgs {
    /// `key = value` file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    problem: Option<String>,
    /// Comma-separated degrees.
    #[arg(long)]
    degrees: Option<String>,
    /// Comma-separated cell counts per patch and axis.
    #[arg(long)]
    sizes: Option<String>,
    /// Patches per axis.
    #[arg(long)]
    patches: Option<usize>,
    /// Comma-separated learning rates; default is the eight-value sweep.
    #[arg(long)]
    lr: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Relative perturbation of the starting knots.
    #[arg(long)]
    jitter: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Report errors on the uniform mesh only.
    #[arg(long)]
    uniform_only: bool,
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Do not write per-run traces.
    #[arg(long)]
    no_traces: bool,
    /// Fill the wall_s column (the summary is then no longer reproducible).
    #[arg(long)]
    timing: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Lemma {
    Boundedness,
    Holder,
    Interchange,
    All,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, value_enum, default_value = "all")]
    lemma: Lemma,
    /// Degree, or comma-separated degrees; default 0..=5.
    #[arg(long)]
    p: Option<String>,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = 0.05)]
    h_min: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the reports as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    /// Output directory of `run`.
    #[arg(long, short)]
    input: PathBuf,
    /// Where to write the SVG files; defaults to the input directory.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Free,
    ZeroTrace,
}

#[derive(Args)]
struct ProjectArgs {
    /// Comma-separated knots (any order) to project.
    #[arg(long, allow_hyphen_values = true)]
    knots: Option<String>,
    #[arg(long, default_value_t = 1)]
    degree: usize,
    #[arg(long, value_enum, default_value = "free")]
    mode: Mode,
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    lo: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    hi: f64,
    #[arg(long, default_value_t = 1e-3)]
    h_min: f64,
    /// Check this many random candidates instead.
    #[arg(long)]
    random: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn threads() -> Result<usize> {
    match std::env::var("FREEKNOT_THREADS") {
        Ok(v) => {
            let n: usize = v.trim().parse().with_context(|| format!("FREEKNOT_THREADS='{v}'"))?;
            Ok(n.max(1))
        }
        Err(_) => Ok(1),
    }
}

fn run(a: RunArgs) -> Result<ExitCode> {
    let mut cfg = match &a.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    let overrides = [
        ("problem", a.problem),
        ("degrees", a.degrees),
        ("sizes", a.sizes),
        ("patches", a.patches.map(|v| v.to_string())),
        ("lr", a.lr),
        ("seed", a.seed.map(|v| v.to_string())),
        ("jitter", a.jitter.map(|v| v.to_string())),
        ("max_iters", a.max_iters.map(|v| v.to_string())),
    ];
    for (k, v) in overrides {
        if let Some(v) = v {
            cfg.set(k, &v)?;
        }
    }
    if let Some(o) = a.output {
        cfg.output = o;
    }
    cfg.uniform_only |= a.uniform_only;
    cfg.traces &= !a.no_traces;
    cfg.timing |= a.timing;
    cfg.threads = threads()?;
    cfg.validate()?;
    let out = run_study(&cfg)?;
    write_study(&cfg.output, &out)?;
    for s in &out.skipped {
        println!("skipped {s}");
    }
    println!(
        "{} configuration(s), {} run(s), summary in {}",
        out.summary.len(),
        out.sweep.len(),
        cfg.output.join("summary.csv").display()
    );
    if out.aborted.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        for m in &out.aborted {
            eprintln!("aborted {m}");
        }
        Ok(ExitCode::from(2))
    }
}

fn verify(a: VerifyArgs) -> Result<ExitCode> {
    let degrees: Vec<usize> = match &a.p {
        Some(s) => s
            .split(',')
            .map(|v| v.trim().parse().with_context(|| format!("bad degree '{v}'")))
            .collect::<Result<_>>()?,
        None => (0..=5).collect(),
    };
    let mut reports: Vec<BoundReport> = Vec::new();
    for &p in &degrees {
        if matches!(a.lemma, Lemma::Boundedness | Lemma::All) {
            reports.extend(check_boundedness(p, a.samples, a.h_min, a.seed)?);
        }
        if matches!(a.lemma, Lemma::Holder | Lemma::All) {
            reports.extend(check_holder(p, a.samples, a.h_min, a.seed.wrapping_add(1))?);
        }
        if matches!(a.lemma, Lemma::Interchange | Lemma::All) {
            reports.extend(check_interchange(p, a.samples, a.h_min, a.seed.wrapping_add(2))?);
        }
    }
    print!("{}", format_table(&reports));
    if let Some(path) = &a.csv {
        let mut s = String::from(BoundReport::CSV_HEADER);
        s.push('\n');
        for r in &reports {
            s.push_str(&r.csv_row());
            s.push('\n');
        }
        fs::write(path, s).with_context(|| format!("writing {}", path.display()))?;
    }
    let failed = reports.iter().filter(|r| !r.pass).count();
    if failed == 0 {
        println!("all {} checks passed", reports.len());
        Ok(ExitCode::SUCCESS)
    } else {
        println!("{failed} of {} checks failed", reports.len());
        Ok(ExitCode::from(1))
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn plot(a: PlotArgs) -> Result<ExitCode> {
    let out = a.output.unwrap_or_else(|| a.input.clone());
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let records = read_records(&a.input.join("summary.csv"))?;
    write(&out.join("convergence_energy.svg"), &convergence_svg(&records, Metric::Energy))?;
    write(&out.join("convergence_l2.svg"), &convergence_svg(&records, Metric::L2))?;
    let mut written = 2;
    let one_d = records
        .first()
        .and_then(|r| problem(&r.experiment).ok())
        .is_some_and(|p| p.dim() == 1);
    let traces = a.input.join("traces");
    if one_d && traces.is_dir() {
        let mut files: Vec<PathBuf> = fs::read_dir(&traces)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "csv"))
            .collect();
        files.sort();
        for f in files {
            let name = f.file_stem().and_then(|s| s.to_str()).unwrap_or("trace").to_string();
            let text = fs::read_to_string(&f).with_context(|| format!("reading {}", f.display()))?;
            let trace = RunTrace::parse_csv(&name, &text)?;
            write(&out.join(format!("knots_{name}.svg")), &trajectory_svg(&trace))?;
            written += 1;
        }
    }
    println!("wrote {written} SVG file(s) to {}", out.display());
    Ok(ExitCode::SUCCESS)
}

fn parse_knots(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|v| v.trim().parse::<f64>().with_context(|| format!("bad knot '{v}'")))
        .collect()
}

fn project_test(a: ProjectArgs) -> Result<ExitCode> {
    if a.hi <= a.lo {
        bail!("empty domain [{}, {}]", a.lo, a.hi);
    }
    let mode = match a.mode {
        Mode::Free => BoundaryMode::Free,
        Mode::ZeroTrace => BoundaryMode::ZeroTrace,
    };
    let check = |cand: &[f64]| -> Result<(Vec<f64>, f64, f64)> {
        let c = ChainConstraints::for_chain(cand.len(), a.degree, (a.lo, a.hi), mode, a.h_min);
        let x = c.project(cand)?;
        let again = c.project(&x)?;
        let drift = x.iter().zip(&again).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
        Ok((x.clone(), c.violation(&x), drift))
    };
    if let Some(n) = a.random {
        let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
        let mut worst_v: f64 = 0.0;
        let mut worst_d: f64 = 0.0;
        let w = a.hi - a.lo;
        for _ in 0..n {
            let len = rng.random_range(a.degree + 2..a.degree + 9);
            let cand: Vec<f64> = (0..len).map(|_| rng.random_range(a.lo - w..a.hi + w)).collect();
            let (_, v, d) = check(&cand)?;
            worst_v = worst_v.max(v);
            worst_d = worst_d.max(d);
        }
        println!("{n} random candidates: max violation {worst_v:e}, max re-projection drift {worst_d:e}");
        let ok = worst_v <= 1e-12 && worst_d <= 1e-12;
        println!("{}", if ok { "PASS" } else { "FAIL" });
        return Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(1) });
    }
    let Some(s) = a.knots else {
        bail!("give --knots or --random");
    };
    let cand = parse_knots(&s)?;
    if cand.len() < a.degree + 2 {
        bail!("need at least {} knots for degree {}", a.degree + 2, a.degree);
    }
    let (x, v, d) = check(&cand)?;
    let txt: Vec<String> = x.iter().map(|k| format!("{k}")).collect();
    println!("projected: {}", txt.join(","));
    println!("violation: {v:e}");
    println!("re-projection drift: {d:e}");
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Run(a) => run(a),
        Command::Verify(a) => verify(a),
        Command::Plot(a) => plot(a),
        Command::ProjectTest(a) => project_test(a),
    };
    match res {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
