//! Standalone SVG line plots built from the CSV files the commands emit.
//!
//! Every plot is a pure function of CSV text, so deleting an `.svg` and
//! re-running [`plot_csv`] on the matching CSV reproduces it byte for byte.

use std::fmt::Write as _;

use anyhow::{bail, Context, Result};

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 160.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];
// more points than this per series get thinned with a fixed stride
const MAX_POINTS: usize = 4000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scale {
    Linear,
    Log,
}

/// One CSV table: first column is the abscissa, the rest are series.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

pub fn parse_csv(text: &str) -> Result<Table> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<String> = lines
        .next()
        .context("empty CSV")?
        .split(',')
        .map(|h| h.trim().to_string())
        .collect();
    if header.len() < 2 {
        bail!("CSV needs at least two columns");
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let row = line
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .with_context(|| format!("CSV data row {}", i + 1))?;
        if row.len() != header.len() {
            bail!("CSV data row {} has {} fields, header has {}", i + 1, row.len(), header.len());
        }
        rows.push(row);
    }
    Ok(Table { header, rows })
}

struct Series {
    label: String,
    points: Vec<(f64, f64)>,
}

/// Plots every non-abscissa column of every `(prefix, csv)` input on one
/// set of axes. Series labels are `prefix column` (or just the column when
/// the prefix is empty).
pub fn plot_csv(inputs: &[(&str, &str)], title: &str, yscale: Scale) -> Result<String> {
    let mut series = Vec::new();
    let mut xlabel = String::new();
    for (prefix, text) in inputs {
        let table = parse_csv(text)?;
        xlabel = table.header[0].clone();
        for (j, name) in table.header.iter().enumerate().skip(1) {
            let label = if prefix.is_empty() {
                name.clone()
            } else {
                format!("{prefix} {name}")
            };
            let stride = table.rows.len().div_ceil(MAX_POINTS).max(1);
            let mut points: Vec<(f64, f64)> = table
                .rows
                .iter()
                .step_by(stride)
                .map(|r| (r[0], r[j]))
                .collect();
            if let Some(last) = table.rows.last() {
                if (table.rows.len() - 1) % stride != 0 {
                    points.push((last[0], last[j]));
                }
            }
            series.push(Series { label, points });
        }
    }
    Ok(render(&series, title, &xlabel, yscale))
}

fn finite_range(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    values
        .filter(|v| v.is_finite())
        .fold(None, |acc, v| match acc {
            None => Some((v, v)),
            Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
        })
}

fn pad(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        (lo, hi)
    } else {
        let w = if lo == 0.0 { 1.0 } else { 0.5 * lo.abs() };
        (lo - w, hi + w)
    }
}

/// Round tick spacing (1, 2 or 5 times a power of ten) giving about `target` ticks.
fn nice_step(span: f64, target: f64) -> f64 {
    let raw = span / target;
    let mag = 10f64.powf(raw.log10().floor());
    let f = raw / mag;
    let m = if f < 1.5 {
        1.0
    } else if f < 3.5 {
        2.0
    } else if f < 7.5 {
        5.0
    } else {
        10.0
    };
    m * mag
}

fn linear_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let step = nice_step(hi - lo, 5.0);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-9 * step {
        out.push(if t.abs() < 1e-12 * step { 0.0 } else { t });
        t += step;
    }
    out
}

fn tick_label(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 {
        "0".into()
    } else if (1e-3..1e4).contains(&a) {
        format!("{}", (v * 1e6).round() / 1e6)
    } else {
        format!("{v:.0e}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn render(series: &[Series], title: &str, xlabel: &str, yscale: Scale) -> String {
    let log = yscale == Scale::Log;
    let ty = |v: f64| if log { v.log10() } else { v };
    let usable = |v: f64| v.is_finite() && (!log || v > 0.0);

    let (x0, x1) = pad_or_unit(finite_range(series.iter().flat_map(|s| s.points.iter().map(|p| p.0))));
    let (y0, y1) = pad_or_unit(finite_range(
        series
            .iter()
            .flat_map(|s| s.points.iter().map(|p| p.1))
            .filter(|v| usable(*v))
            .map(ty),
    ));
    let (y0, y1) = if log { (y0.floor(), y1.ceil().max(y0.floor() + 1.0)) } else { (y0, y1) };

    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + (y1 - y) / (y1 - y0) * ph;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        LEFT + pw / 2.0,
        escape(title)
    );

    // grid lines and tick labels
    for t in linear_ticks(x0, x1) {
        let x = sx(t);
        let _ = writeln!(
            svg,
            r##"<line x1="{x:.2}" y1="{TOP}" x2="{x:.2}" y2="{:.2}" stroke="#e0e0e0"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
            TOP + ph,
            TOP + ph + 18.0,
            tick_label(t)
        );
    }
    let yticks: Vec<(f64, String)> = if log {
        let stride = (((y1 - y0) / 8.0).ceil() as i64).max(1);
        (y0 as i64..=y1 as i64)
            .filter(|e| (e - y0 as i64) % stride == 0)
            .map(|e| (e as f64, format!("1e{e}")))
            .collect()
    } else {
        linear_ticks(y0, y1).into_iter().map(|t| (t, tick_label(t))).collect()
    };
    for (t, label) in yticks {
        let y = sy(t);
        let _ = writeln!(
            svg,
            r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#e0e0e0"/><text x="{:.2}" y="{:.2}" text-anchor="end">{label}</text>"##,
            LEFT + pw,
            LEFT - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 14.0,
        escape(xlabel)
    );

    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        // broken into separate polylines wherever a value is unusable
        let mut runs: Vec<Vec<(f64, f64)>> = vec![Vec::new()];
        for &(x, y) in &s.points {
            if x.is_finite() && usable(y) {
                runs.last_mut().unwrap().push((sx(x), sy(ty(y))));
            } else if !runs.last().unwrap().is_empty() {
                runs.push(Vec::new());
            }
        }
        for run in runs.iter().filter(|r| !r.is_empty()) {
            let pts: Vec<String> = run.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
            let _ = writeln!(
                svg,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{}"/>"#,
                pts.join(" ")
            );
        }
        let ly = TOP + 14.0 + 18.0 * i as f64;
        let lx = LEFT + pw + 12.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx}" y1="{:.2}" x2="{}" y2="{:.2}" stroke="{color}" stroke-width="2"/><text x="{}" y="{ly:.2}">{}</text>"#,
            ly - 4.0,
            lx + 20.0,
            ly - 4.0,
            lx + 26.0,
            escape(&s.label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn pad_or_unit(r: Option<(f64, f64)>) -> (f64, f64) {
    match r {
        Some((lo, hi)) => pad(lo, hi),
        None => (0.0, 1.0),
    }
}
