use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn freeknot(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_freeknot"))
        .args(args)
        .env("FREEKNOT_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn small_run(dir: &Path, seed: &str) -> Output {
    freeknot(&[
        "run",
        "--problem",
        "approx1d",
        "--degrees",
        "1,2",
        "--sizes",
        "6",
        "--lr",
        "5e-2,1e-2",
        "--max-iters",
        "10",
        "--seed",
        seed,
        "--jitter",
        "0.2",
        "-o",
        dir.to_str().unwrap(),
    ])
}

#[test]
fn run_writes_summary_sweep_and_traces() {
    let tmp = tempfile::tempdir().unwrap();
    let out = small_run(tmp.path(), "3");
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = fs::read_to_string(tmp.path().join("summary.csv")).unwrap();
    let lines: Vec<&str> = summary.lines().collect();
    assert_eq!(lines[0], freeknot::experiment::SUMMARY_HEADER);
    assert_eq!(lines.len(), 3);
    assert!(lines[1..].iter().all(|l| l.split(',').count() == 13));
    let sweep = fs::read_to_string(tmp.path().join("sweep.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 5);
    assert_eq!(fs::read_dir(tmp.path().join("traces")).unwrap().count(), 4);
}

#[test]
fn run_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(small_run(a.path(), "9").status.success());
    assert!(small_run(b.path(), "9").status.success());
    let read = |d: &Path| fs::read(d.join("summary.csv")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
}

#[test]
fn run_reads_config_and_reports_skips() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("study.cfg");
    fs::write(&cfg, "# gate test\nproblem = poisson1d\ndegrees = 1\npatches = 2\nsizes = 4\nlr = 1e-2\nmax_iters = 3\n").unwrap();
    let out_dir = tmp.path().join("out");
    let out = freeknot(&["run", "--config", cfg.to_str().unwrap(), "-o", out_dir.to_str().unwrap(), "--no-traces"]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("skipped"));
    let s = fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    assert!(s.lines().nth(1).unwrap().starts_with("poisson1d,1,2,"));
    assert!(!out_dir.join("traces").exists());
}

#[test]
fn bad_input_exits_with_error() {
    let out = freeknot(&["run", "--problem", "nope", "-o", "/nonexistent/x"]);
    assert_eq!(out.status.code(), Some(1));
    let out = Command::new(env!("CARGO_BIN_EXE_freeknot"))
        .args(["run", "--max-iters", "1", "--sizes", "4", "--degrees", "1", "--uniform-only"])
        .env("FREEKNOT_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn verify_prints_table_and_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("v.csv");
    let out = freeknot(&["verify", "--lemma", "all", "--p", "1,2", "--samples", "40", "--csv", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    assert!(stdout(&out).contains("checks passed"));
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next().unwrap(), freeknot::verify::BoundReport::CSV_HEADER);
    assert!(text.lines().count() > 5);
}

#[test]
fn plot_writes_svgs() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(small_run(tmp.path(), "1").status.success());
    let svg = tmp.path().join("svg");
    let out = freeknot(&["plot", "-i", tmp.path().to_str().unwrap(), "-o", svg.to_str().unwrap()]);
    assert!(out.status.success());
    let names: Vec<String> = fs::read_dir(&svg)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert!(names.contains(&"convergence_l2.svg".to_string()));
    assert!(names.contains(&"convergence_energy.svg".to_string()));
    assert_eq!(names.iter().filter(|n| n.starts_with("knots_")).count(), 4);
    let body = fs::read_to_string(svg.join("convergence_l2.svg")).unwrap();
    assert!(body.starts_with("<svg") && body.trim_end().ends_with("</svg>"));
}

#[test]
fn project_test_modes() {
    let out = freeknot(&["project-test", "--knots", "0.5,0.5,-2,3", "--degree", "1", "--h-min", "0.1"]);
    assert!(out.status.success());
    let s = stdout(&out);
    assert!(s.contains("projected:"));
    let v: f64 = s
        .lines()
        .find_map(|l| l.strip_prefix("violation: "))
        .and_then(|v| v.parse().ok())
        .unwrap();
    assert!(v <= 1e-12, "{s}");
    let out = freeknot(&["project-test", "--random", "200", "--mode", "zero-trace", "--degree", "2"]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("PASS"));
    let out = freeknot(&["project-test", "--knots", "0.1", "--degree", "2"]);
    assert_eq!(out.status.code(), Some(1));
}
