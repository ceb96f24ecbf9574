//! Legacy VTK, CSV and SVG writers, and the `key = value` run configuration.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{HdgError, Result};
use crate::flow_solvers::Solution;
use crate::mesh::Mesh;
use crate::refelem::{ElementType, ReferenceElement};
use crate::verification::{ConvergenceTable, SweepParameter, SweepRow};

/// Fields of `sol` as a legacy ASCII VTK unstructured grid. Every element
/// keeps its own copy of its nodes, so the discontinuous fields are written
/// exactly; high-order elements are split into linear cells.
pub fn vtk_string(mesh: &Mesh, sol: &Solution) -> Result<String> {
    let re = ReferenceElement::new(mesh.elem_type, mesh.degree)?;
    let re_star = ReferenceElement::new(mesh.elem_type, mesh.degree + 1)?;
    let nen = re.num_nodes();
    let ne = mesh.num_elements();
    if sol.u.len() != ne {
        return Err(HdgError::InvalidInput("solution does not belong to this mesh".into()));
    }
    let sub = re.linear_subcells();
    let (cell_type, nv) = match mesh.elem_type {
        ElementType::Triangle => (5, 3),
        ElementType::Quadrilateral => (9, 4),
        ElementType::Segment => return Err(HdgError::InvalidInput("cannot export segment meshes".into())),
    };
    let mut s = String::new();
    let _ = writeln!(s, "# vtk DataFile Version 3.0");
    let _ = writeln!(s, "hdg solution, degree {}", mesh.degree);
    let _ = writeln!(s, "ASCII\nDATASET UNSTRUCTURED_GRID");
    let _ = writeln!(s, "POINTS {} double", ne * nen);
    for e in 0..ne {
        for &n in &mesh.elements[e] {
            let x = mesh.nodes[n];
            let _ = writeln!(s, "{:.16e} {:.16e} 0", x[0], x[1]);
        }
    }
    let ncell = ne * sub.len();
    let _ = writeln!(s, "CELLS {} {}", ncell, ncell * (nv + 1));
    for e in 0..ne {
        for c in &sub {
            let _ = write!(s, "{nv}");
            for &i in c {
                let _ = write!(s, " {}", e * nen + i);
            }
            s.push('\n');
        }
    }
    let _ = writeln!(s, "CELL_TYPES {ncell}");
    for _ in 0..ncell {
        let _ = writeln!(s, "{cell_type}");
    }
    let _ = writeln!(s, "POINT_DATA {}", ne * nen);
    let _ = writeln!(s, "VECTORS u double");
    for e in 0..ne {
        for j in 0..nen {
            let _ = writeln!(s, "{:.16e} {:.16e} 0", sol.u[e][2 * j], sol.u[e][2 * j + 1]);
        }
    }
    if let Some(us) = &sol.ustar {
        let _ = writeln!(s, "VECTORS ustar double");
        let ns = re_star.num_nodes();
        for e in 0..ne {
            for xi in &re.nodes {
                let (n, _) = re_star.shape(*xi);
                let mut v = [0.0; 2];
                for j in 0..ns {
                    v[0] += n[j] * us[e][2 * j];
                    v[1] += n[j] * us[e][2 * j + 1];
                }
                let _ = writeln!(s, "{:.16e} {:.16e} 0", v[0], v[1]);
            }
        }
    }
    let mut scalar = |name: &str, f: &dyn Fn(usize, usize) -> f64| {
        let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
        for e in 0..ne {
            for j in 0..nen {
                let _ = writeln!(s, "{:.16e}", f(e, j));
            }
        }
    };
    scalar("p", &|e, j| sol.p[e][j]);
    scalar("L_11", &|e, j| sol.l[e][3 * j]);
    scalar("L_22", &|e, j| sol.l[e][3 * j + 1]);
    scalar("L_12", &|e, j| sol.l[e][3 * j + 2]);
    Ok(s)
}

pub fn write_vtk(path: &Path, mesh: &Mesh, sol: &Solution) -> Result<()> {
    std::fs::write(path, vtk_string(mesh, sol)?)?;
    Ok(())
}

fn fmt_rate(r: Option<f64>) -> String {
    match r {
        Some(v) if v.is_finite() => format!("{v:.4}"),
        _ => String::new(),
    }
}

/// Convergence table as CSV. Each row carries the rates fitted for its
/// degree.
pub fn convergence_csv(table: &ConvergenceTable) -> String {
    let mut s = String::from(
        "case,regime,k,h,n_dof_global,err_u,err_ustar,err_L,err_p,linf_u,newton_iterations,converged,rate_u,rate_ustar,rate_L,rate_p\n",
    );
    for r in &table.rows {
        let rates = table.rates_for(r.k);
        let e = &r.errors;
        let _ = writeln!(
            s,
            "{},{},{},{:.10e},{},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{},{},{},{},{},{}",
            r.case,
            r.regime.name(),
            r.k,
            r.h,
            r.n_dof,
            e.u,
            e.ustar,
            e.l,
            e.p,
            e.linf_u,
            r.newton_iterations,
            r.converged,
            fmt_rate(rates.map(|x| x.u)),
            fmt_rate(rates.map(|x| x.ustar)),
            fmt_rate(rates.map(|x| x.l)),
            fmt_rate(rates.map(|x| x.p)),
        );
    }
    s
}

pub fn sweep_csv(parameter: SweepParameter, rows: &[SweepRow]) -> String {
    let mut s = format!("{},err_u,err_ustar,err_L,err_p,status\n", parameter.name());
    for r in rows {
        match &r.errors {
            Some(e) => {
                let _ = writeln!(s, "{:e},{:.10e},{:.10e},{:.10e},{:.10e},ok", r.value, e.u, e.ustar, e.l, e.p);
            }
            None => {
                let _ = writeln!(s, "{:e},,,,,\"{}\"", r.value, r.status.replace('"', "'"));
            }
        }
    }
    s
}

/// One plotted series: label and (x, y) points.
pub type PlotSeries = (String, Vec<(f64, f64)>);

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Log-log line plot as a standalone SVG document. Non-positive and
/// non-finite points are skipped.
pub fn loglog_svg(title: &str, xlabel: &str, ylabel: &str, series: &[PlotSeries]) -> String {
    loglog_svg_with_refs(title, xlabel, ylabel, series, &[])
}

/// As [`loglog_svg`], with extra `refs` drawn as thin dashed grey lines.
pub fn loglog_svg_with_refs(title: &str, xlabel: &str, ylabel: &str, series: &[PlotSeries], refs: &[PlotSeries]) -> String {
    let (w, h) = (640.0, 480.0);
    let (ml, mr, mt, mb) = (80.0, 150.0, 40.0, 60.0);
    let pts: Vec<(f64, f64)> = series
        .iter()
        .chain(refs)
        .flat_map(|(_, p)| p.iter().copied())
        .filter(|(x, y)| *x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite())
        .map(|(x, y)| (x.log10(), y.log10()))
        .collect();
    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">"
    );
    let _ = writeln!(s, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">{}</text>",
        ml + (w - ml - mr) / 2.0,
        escape(title)
    );
    if pts.is_empty() {
        s.push_str("</svg>\n");
        return s;
    }
    let fl = |v: f64| v.floor();
    let cl = |v: f64| v.ceil();
    let x0 = fl(pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min));
    let mut x1 = cl(pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max));
    let y0 = fl(pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min));
    let mut y1 = cl(pts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max));
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let px = |x: f64| ml + (x - x0) / (x1 - x0) * (w - ml - mr);
    let py = |y: f64| h - mb - (y - y0) / (y1 - y0) * (h - mt - mb);
    let _ = writeln!(
        s,
        "<rect x=\"{ml}\" y=\"{mt}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>",
        w - ml - mr,
        h - mt - mb
    );
    let mut d = x0;
    while d <= x1 + 1e-9 {
        let x = px(d);
        let _ = writeln!(
            s,
            "<line x1=\"{x}\" y1=\"{mt}\" x2=\"{x}\" y2=\"{}\" stroke=\"#ddd\"/><text x=\"{x}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">1e{}</text>",
            h - mb,
            h - mb + 18.0,
            d as i64
        );
        d += 1.0;
    }
    let mut d = y0;
    while d <= y1 + 1e-9 {
        let y = py(d);
        let _ = writeln!(
            s,
            "<line x1=\"{ml}\" y1=\"{y}\" x2=\"{}\" y2=\"{y}\" stroke=\"#ddd\"/><text x=\"{}\" y=\"{}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\">1e{}</text>",
            w - mr,
            ml - 6.0,
            y + 4.0,
            d as i64
        );
        d += 1.0;
    }
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">{}</text>",
        ml + (w - ml - mr) / 2.0,
        h - 15.0,
        escape(xlabel)
    );
    let _ = writeln!(
        s,
        "<text x=\"20\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" transform=\"rotate(-90 20 {})\">{}</text>",
        mt + (h - mt - mb) / 2.0,
        mt + (h - mt - mb) / 2.0,
        escape(ylabel)
    );
    let visible = |p: &[(f64, f64)]| -> Vec<(f64, f64)> {
        p.iter()
            .filter(|(x, y)| *x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite())
            .map(|(x, y)| (px(x.log10()), py(y.log10())))
            .collect()
    };
    for (label, p) in refs {
        let q = visible(p);
        if q.len() >= 2 {
            let path: Vec<String> = q.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
            let _ = writeln!(
                s,
                "<polyline points=\"{}\" fill=\"none\" stroke=\"#888\" stroke-width=\"1\" stroke-dasharray=\"6 4\"/>",
                path.join(" ")
            );
            let (x, y) = q[q.len() - 1];
            let _ = writeln!(
                s,
                "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"10\" fill=\"#555\">{}</text>",
                x + 4.0,
                y,
                escape(label)
            );
        }
    }
    for (i, (label, p)) in series.iter().enumerate() {
        let c = COLORS[i % COLORS.len()];
        let q = visible(p);
        if !q.is_empty() {
            let path: Vec<String> = q.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
            let _ = writeln!(
                s,
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{c}\" stroke-width=\"2\"/>",
                path.join(" ")
            );
            for (x, y) in &q {
                let _ = writeln!(s, "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"3\" fill=\"{c}\"/>");
            }
        }
        let ly = mt + 16.0 + 18.0 * i as f64;
        let lx = w - mr + 12.0;
        let _ = writeln!(
            s,
            "<line x1=\"{lx}\" y1=\"{ly}\" x2=\"{}\" y2=\"{ly}\" stroke=\"{c}\" stroke-width=\"2\"/><text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\">{}</text>",
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(label)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Error-versus-h plot of a convergence table, with the fitted rates in the
/// legend and dashed reference slopes h^(k+1) and h^(k+2) starting at the
/// coarsest u and u* errors.
pub fn convergence_svg(table: &ConvergenceTable, title: &str) -> String {
    let mut series = Vec::new();
    let mut refs = Vec::new();
    let mut ks: Vec<usize> = table.rows.iter().map(|r| r.k).collect();
    ks.dedup();
    for k in ks {
        let rows = table.rows_for(k);
        let rates = table.rates_for(k);
        let pick: [(&str, fn(&crate::verification::Errors) -> f64, Option<f64>); 4] = [
            ("u", |e| e.u, rates.map(|r| r.u)),
            ("u*", |e| e.ustar, rates.map(|r| r.ustar)),
            ("L", |e| e.l, rates.map(|r| r.l)),
            ("p", |e| e.p, rates.map(|r| r.p)),
        ];
        for (name, f, rate) in pick {
            let label = match rate {
                Some(r) => format!("{name} k={k} ({r:.2})"),
                None => format!("{name} k={k}"),
            };
            series.push((label, rows.iter().map(|r| (r.h, f(&r.errors))).collect()));
        }
        if let (Some(first), Some(last)) = (rows.first(), rows.last()) {
            for (slope, e0) in [(k + 1, first.errors.u), (k + 2, first.errors.ustar)] {
                let e1 = e0 * (last.h / first.h).powi(slope as i32);
                refs.push((format!("h^{slope}"), vec![(first.h, e0), (last.h, e1)]));
            }
        }
    }
    loglog_svg_with_refs(title, "h", "relative L2 error", &series, &refs)
}

pub fn sweep_svg(parameter: SweepParameter, rows: &[SweepRow], title: &str) -> String {
    let pick: [(&str, fn(&crate::verification::Errors) -> f64); 4] =
        [("u", |e| e.u), ("u*", |e| e.ustar), ("L", |e| e.l), ("p", |e| e.p)];
    let series: Vec<PlotSeries> = pick
        .iter()
        .map(|(name, f)| {
            (
                name.to_string(),
                rows.iter().filter_map(|r| r.errors.as_ref().map(|e| (r.value, f(e)))).collect(),
            )
        })
        .collect();
    loglog_svg(title, parameter.name(), "relative L2 error", &series)
}

/// Parsed `key = value` configuration. Blank lines and text after `#` are
/// ignored; later keys override earlier ones.
#[derive(Debug, Clone, Default)]
pub struct Config {
    pub values: BTreeMap<String, String>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| HdgError::Parse(format!("line {}: expected key = value", i + 1)))?;
            let k = k.trim();
            if k.is_empty() {
                return Err(HdgError::Parse(format!("line {}: empty key", i + 1)));
            }
            values.insert(k.to_string(), v.trim().to_string());
        }
        Ok(Self { values })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn get_parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| HdgError::Parse(format!("bad value '{v}' for key '{key}'"))),
        }
    }

    /// Keys not in `known`.
    pub fn unknown_keys(&self, known: &[&str]) -> Vec<String> {
        self.values.keys().filter(|k| !known.contains(&k.as_str())).cloned().collect()
    }
}
