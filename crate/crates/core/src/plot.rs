//! Minimal SVG output: log-log convergence plots and knot trajectories.

use std::fmt::Write as _;

use crate::experiment::{ConvergenceRecord, RunTrace};

const W: f64 = 640.0;
const H: f64 = 480.0;
const M: f64 = 60.0;
const COLOURS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Which error column to plot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Energy,
    L2,
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        M + (x - self.x0) / (self.x1 - self.x0) * (W - 2.0 * M)
    }

    fn py(&self, y: f64) -> f64 {
        H - M - (y - self.y0) / (self.y1 - self.y0) * (H - 2.0 * M)
    }
}

fn header(title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title));
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn axes(s: &mut String, xlabel: &str, ylabel: &str) {
    let _ = writeln!(
        s,
        r#"<rect x="{M}" y="{M}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * M,
        H - 2.0 * M
    );
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W / 2.0, H - 15.0, escape(xlabel));
    let _ = writeln!(
        s,
        r#"<text x="15" y="{}" text-anchor="middle" transform="rotate(-90 15 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(ylabel)
    );
}

fn polyline(s: &mut String, pts: &[(f64, f64)], colour: &str, dashed: bool, width: f64) {
    if pts.is_empty() {
        return;
    }
    let coords: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
    let dash = if dashed { r#" stroke-dasharray="6 4""# } else { "" };
    let _ = writeln!(
        s,
        r#"<polyline points="{}" fill="none" stroke="{colour}" stroke-width="{width}"{dash}/>"#,
        coords.join(" ")
    );
}

fn decade_ticks(s: &mut String, f: &Frame) {
    for e in f.x0.floor() as i32..=f.x1.ceil() as i32 {
        let v = e as f64;
        if v < f.x0 || v > f.x1 {
            continue;
        }
        let x = f.px(v);
        let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{}" x2="{x:.2}" y2="{}" stroke="black"/>"#, H - M, H - M + 5.0);
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{}" text-anchor="middle">1e{e}</text>"#, H - M + 18.0);
    }
    for e in f.y0.floor() as i32..=f.y1.ceil() as i32 {
        let v = e as f64;
        if v < f.y0 || v > f.y1 {
            continue;
        }
        let y = f.py(v);
        let _ = writeln!(s, r#"<line x1="{}" y1="{y:.2}" x2="{M}" y2="{y:.2}" stroke="black"/>"#, M - 5.0);
        let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">1e{e}</text>"#, M - 8.0, y + 4.0);
    }
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    }
}

/// Error against degrees of freedom on log-log axes; one colour per degree,
/// dashed for the uniform mesh and solid for the optimised knots.
pub fn convergence_svg(records: &[ConvergenceRecord], metric: Metric) -> String {
    let pick = |r: &ConvergenceRecord| match metric {
        Metric::Energy => (r.err_energy_uniform, r.err_energy_adapted),
        Metric::L2 => (r.err_l2_uniform, r.err_l2_adapted),
    };
    let mut degrees: Vec<usize> = records.iter().map(|r| r.degree).collect();
    degrees.sort_unstable();
    degrees.dedup();
    let mut series = Vec::new();
    for &p in &degrees {
        let mut rows: Vec<&ConvergenceRecord> = records.iter().filter(|r| r.degree == p && !r.skipped()).collect();
        rows.sort_by_key(|r| r.n_dofs);
        let get = |adapted: bool| -> Vec<(f64, f64)> {
            rows.iter()
                .filter_map(|r| {
                    let (u, a) = pick(r);
                    let v = if adapted { a } else { u }?;
                    (v > 0.0).then(|| ((r.n_dofs as f64).log10(), v.log10()))
                })
                .collect()
        };
        series.push((p, get(false), get(true)));
    }
    let all: Vec<(f64, f64)> = series.iter().flat_map(|(_, u, a)| u.iter().chain(a).copied()).collect();
    let name = records.first().map_or("", |r| r.experiment.as_str());
    let label = match metric {
        Metric::Energy => "energy-norm error",
        Metric::L2 => "L2 error",
    };
    let mut s = header(&format!("{name}: {label}"));
    if all.is_empty() {
        s.push_str("</svg>\n");
        return s;
    }
    let (x0, x1) = padded(
        all.iter().map(|p| p.0).fold(f64::INFINITY, f64::min),
        all.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max),
    );
    let (y0, y1) = padded(
        all.iter().map(|p| p.1).fold(f64::INFINITY, f64::min),
        all.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max),
    );
    let f = Frame { x0, x1, y0, y1 };
    axes(&mut s, "degrees of freedom", label);
    decade_ticks(&mut s, &f);
    for (k, (p, u, a)) in series.iter().enumerate() {
        let c = COLOURS[k % COLOURS.len()];
        let map = |v: &[(f64, f64)]| v.iter().map(|&(x, y)| (f.px(x), f.py(y))).collect::<Vec<_>>();
        polyline(&mut s, &map(u), c, true, 1.5);
        polyline(&mut s, &map(a), c, false, 2.0);
        for (x, y) in map(u).iter().chain(&map(a)) {
            let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="3" fill="{c}"/>"#);
        }
        let ly = M + 16.0 + 16.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{ly}" fill="{c}">p = {p} (dashed uniform, solid adapted)</text>"#,
            W - M - 260.0
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Positions of every knot (horizontal) against the iteration (vertical).
pub fn trajectory_svg(trace: &RunTrace) -> String {
    let mut s = header(&trace.name);
    let rows = &trace.rows;
    let Some(first) = rows.first() else {
        s.push_str("</svg>\n");
        return s;
    };
    let nk = first.knots.len();
    let xs = rows.iter().flat_map(|r| r.knots.iter().copied());
    let (lo, hi) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    let (x0, x1) = padded(lo, hi);
    let last = rows.last().map_or(0, |r| r.iter) as f64;
    let f = Frame {
        x0,
        x1,
        y0: 0.0,
        y1: last.max(1.0),
    };
    axes(&mut s, "knot position", "iteration");
    for (v, anchor) in [(x0, "start"), (x1, "end")] {
        let _ = writeln!(s, r#"<text x="{:.2}" y="{}" text-anchor="{anchor}">{v:.3}</text>"#, f.px(v), H - M + 18.0);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{last}</text>"#, M - 8.0, f.py(f.y1) + 4.0);
    for k in 0..nk {
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .filter_map(|r| r.knots.get(k).map(|&x| (f.px(x), f.py(r.iter as f64))))
            .collect();
        polyline(&mut s, &pts, COLOURS[k % COLOURS.len()], false, 1.0);
    }
    s.push_str("</svg>\n");
    s
}
