//! Self-contained SVG line plots of result tables: per-scheme mean curves
//! with a shaded one-standard-deviation band.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::table::RawTable;
use crate::error::{Error, Result};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlotKind {
    /// Mean cost against outer iteration.
    CostVsIter,
    /// Mean final cost against the swept parameter.
    CostVsSweep,
}

impl FromStr for PlotKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cost_vs_iter" => Ok(PlotKind::CostVsIter),
            "cost_vs_sweep" => Ok(PlotKind::CostVsSweep),
            other => Err(Error::validation(format!(
                "unknown plot kind '{other}' (expected cost_vs_iter or cost_vs_sweep)"
            ))),
        }
    }
}

/// One curve point: x, mean, standard deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesPoint {
    pub x: f64,
    pub mean: f64,
    pub std: f64,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn parse_num(s: &str) -> Result<f64> {
    if s.is_empty() {
        return Ok(0.0);
    }
    s.parse()
        .map_err(|_| Error::validation(format!("non-numeric cell '{s}'")))
}

/// Per-scheme series (in order of first appearance) computed from the
/// per-seed rows; rows whose seed is not an integer are skipped.
pub fn series(table: &RawTable, kind: PlotKind) -> Result<Vec<(String, Vec<SeriesPoint>)>> {
    let cols = match kind {
        PlotKind::CostVsIter => table.require(&["scheme", "seed", "iteration", "c_global"])?,
        PlotKind::CostVsSweep => {
            table.require(&["scheme", "seed", "sweep_value", "iteration", "c_global"])?
        }
    };
    let mut order: Vec<String> = Vec::new();
    // scheme -> x -> seed -> (iteration, cost), keeping the latest iteration
    type Runs = BTreeMap<u64, Vec<(usize, f64)>>;
    let mut grouped: BTreeMap<String, BTreeMap<u64, Runs>> = BTreeMap::new();
    for row in &table.rows {
        let Ok(seed) = row[cols[1]].parse::<u64>() else {
            continue;
        };
        let scheme = row[cols[0]].clone();
        if !order.contains(&scheme) {
            order.push(scheme.clone());
        }
        let (x_key, iteration, cost) = match kind {
            PlotKind::CostVsIter => (
                0.0,
                parse_num(&row[cols[2]])? as usize,
                parse_num(&row[cols[3]])?,
            ),
            PlotKind::CostVsSweep => (
                parse_num(&row[cols[2]])?,
                parse_num(&row[cols[3]])? as usize,
                parse_num(&row[cols[4]])?,
            ),
        };
        grouped
            .entry(scheme)
            .or_default()
            .entry(x_key.to_bits())
            .or_default()
            .entry(seed)
            .or_default()
            .push((iteration, cost));
    }

    let mut out = Vec::new();
    for scheme in order {
        let by_x = &grouped[&scheme];
        let mut points = Vec::new();
        match kind {
            PlotKind::CostVsIter => {
                let runs = &by_x[&0f64.to_bits()];
                let last_iter = runs.values().flatten().map(|(i, _)| *i).max().unwrap_or(0);
                for it in 0..=last_iter {
                    // runs that stopped earlier hold their final value
                    let values: Vec<f64> = runs
                        .values()
                        .filter_map(|rows| {
                            rows.iter()
                                .filter(|(i, _)| *i <= it)
                                .max_by_key(|(i, _)| *i)
                                .map(|(_, c)| *c)
                        })
                        .collect();
                    if values.is_empty() {
                        continue;
                    }
                    let (mean, std) = mean_std(&values);
                    points.push(SeriesPoint {
                        x: it as f64,
                        mean,
                        std,
                    });
                }
            }
            PlotKind::CostVsSweep => {
                let mut xs: Vec<f64> = by_x.keys().map(|&b| f64::from_bits(b)).collect();
                xs.sort_by(f64::total_cmp);
                for x in xs {
                    let values: Vec<f64> = by_x[&x.to_bits()]
                        .values()
                        .filter_map(|rows| rows.iter().max_by_key(|(i, _)| *i).map(|(_, c)| *c))
                        .collect();
                    let (mean, std) = mean_std(&values);
                    points.push(SeriesPoint { x, mean, std });
                }
            }
        }
        out.push((scheme, points));
    }
    Ok(out)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn tick_label(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e4) {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn finite_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
        let pad = lo.abs().max(1.0) * 0.05;
        return (lo - pad, hi + pad);
    }
    (lo, hi)
}

/// Render the plot as an SVG document.
pub fn render_svg(table: &RawTable, kind: PlotKind) -> Result<String> {
    let data = series(table, kind)?;
    if data.iter().all(|(_, pts)| pts.is_empty()) {
        return Err(Error::validation("no per-seed rows to plot"));
    }
    let all = || data.iter().flat_map(|(_, p)| p.iter());
    let (x0, x1) = finite_range(all().map(|p| p.x));
    let (y0, y1) = finite_range(all().flat_map(|p| [p.mean - p.std, p.mean + p.std]));
    let (pw, ph) = (WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM);
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + ph - (y.clamp(y0, y1) - y0) / (y1 - y0) * ph;
    let (title, xlabel) = match kind {
        PlotKind::CostVsIter => ("C_Global vs. iterations", "Iteration"),
        PlotKind::CostVsSweep => ("C_Global vs. sweep value", "Sweep value"),
    };

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        s,
        r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="15">{title}</text>"#,
        LEFT + pw / 2.0
    );
    // axes and ticks
    let _ = writeln!(
        s,
        r#"<g class="axes" stroke="black" fill="none"><line x1="{LEFT}" y1="{:.2}" x2="{:.2}" y2="{:.2}"/><line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{:.2}"/></g>"#,
        TOP + ph,
        LEFT + pw,
        TOP + ph,
        TOP + ph
    );
    for i in 0..=5 {
        let t = i as f64 / 5.0;
        let (xv, yv) = (x0 + t * (x1 - x0), y0 + t * (y1 - y0));
        let _ = writeln!(
            s,
            r#"<line x1="{0:.2}" y1="{1:.2}" x2="{0:.2}" y2="{2:.2}" stroke="black"/><text x="{0:.2}" y="{3:.2}" text-anchor="middle">{4}</text>"#,
            sx(xv),
            TOP + ph,
            TOP + ph + 5.0,
            TOP + ph + 20.0,
            escape(&tick_label(xv))
        );
        let _ = writeln!(
            s,
            r#"<line x1="{0:.2}" y1="{1:.2}" x2="{2:.2}" y2="{1:.2}" stroke="black"/><text x="{3:.2}" y="{4:.2}" text-anchor="end">{5}</text>"#,
            LEFT - 5.0,
            sy(yv),
            LEFT,
            LEFT - 8.0,
            sy(yv) + 4.0,
            escape(&tick_label(yv))
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{xlabel}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 15.0
    );
    let _ = writeln!(
        s,
        r#"<text x="20" y="{0:.2}" text-anchor="middle" transform="rotate(-90 20 {0:.2})">C_Global (mean ± 1 std)</text>"#,
        TOP + ph / 2.0
    );

    for (k, (scheme, pts)) in data.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let _ = writeln!(s, r#"<g class="series" data-scheme="{}">"#, escape(scheme));
        if pts.len() > 1 {
            let upper = pts
                .iter()
                .map(|p| format!("{:.2},{:.2}", sx(p.x), sy(p.mean + p.std)));
            let lower = pts
                .iter()
                .rev()
                .map(|p| format!("{:.2},{:.2}", sx(p.x), sy(p.mean - p.std)));
            let band: Vec<String> = upper.chain(lower).collect();
            let _ = writeln!(
                s,
                r#"<polygon points="{}" fill="{color}" fill-opacity="0.18" stroke="none"/>"#,
                band.join(" ")
            );
            let line: Vec<String> = pts
                .iter()
                .map(|p| format!("{:.2},{:.2}", sx(p.x), sy(p.mean)))
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
                line.join(" ")
            );
        }
        for p in pts {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                sx(p.x),
                sy(p.mean)
            );
        }
        let _ = writeln!(s, "</g>");
    }

    let _ = writeln!(s, r#"<g class="legend">"#);
    for (k, (scheme, _)) in data.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let y = TOP + 10.0 + 20.0 * k as f64;
        let x = WIDTH - RIGHT + 15.0;
        let _ = writeln!(
            s,
            r#"<g class="legend-entry"><rect x="{x:.2}" y="{:.2}" width="14" height="4" fill="{color}"/><text x="{:.2}" y="{:.2}">{}</text></g>"#,
            y - 2.0,
            x + 20.0,
            y + 4.0,
            escape(scheme)
        );
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, "</svg>");
    Ok(s)
}

pub fn emit_plot(table: &RawTable, kind: PlotKind, path: &Path) -> Result<()> {
    let svg = render_svg(table, kind)?;
    std::fs::write(path, svg).map_err(|e| Error::io(path, e))
}
