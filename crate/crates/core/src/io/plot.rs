//! Space-time heatmaps: long-format CSV (`t,x,value`) and a standalone SVG
//! with time on the horizontal axis.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use super::IoError;
use crate::domain::FlowState;
use crate::orchestrator::SignalMarkers;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotField {
    Density,
    Velocity,
}

impl PlotField {
    pub fn name(&self) -> &'static str {
        match self {
            PlotField::Density => "rho",
            PlotField::Velocity => "v",
        }
    }

    fn label(&self) -> &'static str {
        match self {
            PlotField::Density => "density (veh/m)",
            PlotField::Velocity => "speed (m/s)",
        }
    }

    fn values<'a>(&self, s: &'a FlowState) -> &'a [f64] {
        match self {
            PlotField::Density => &s.rho,
            PlotField::Velocity => &s.v,
        }
    }
}

impl FromStr for PlotField {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rho" => Ok(PlotField::Density),
            "v" => Ok(PlotField::Velocity),
            other => Err(format!("unknown plot field `{other}` (expected rho or v)")),
        }
    }
}

pub fn plot_csv(states: &[&FlowState], field: PlotField) -> String {
    let mut out = format!("t,x,{}\n", field.name());
    for s in states {
        for (x, v) in s.grid.centers().iter().zip(field.values(s)) {
            let _ = writeln!(out, "{:?},{x:?},{v:?}", s.t);
        }
    }
    out
}

/// Minimum and maximum of `field` over every snapshot.
pub fn value_range(states: &[&FlowState], field: PlotField) -> (f64, f64) {
    states
        .iter()
        .flat_map(|s| field.values(s).iter().copied())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        })
}

const STOPS: [(f64, [u8; 3]); 5] = [
    (0.0, [68, 1, 84]),
    (0.25, [59, 82, 139]),
    (0.5, [33, 145, 140]),
    (0.75, [94, 201, 98]),
    (1.0, [253, 231, 37]),
];

fn color(u: f64) -> String {
    let u = if u.is_finite() {
        u.clamp(0.0, 1.0)
    } else {
        0.0
    };
    let k = STOPS
        .iter()
        .position(|(p, _)| *p >= u)
        .unwrap_or(STOPS.len() - 1)
        .max(1);
    let (p0, c0) = STOPS[k - 1];
    let (p1, c1) = STOPS[k];
    let w = (u - p0) / (p1 - p0);
    let mix = |i: usize| (c0[i] as f64 + w * (c1[i] as f64 - c0[i] as f64)).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(0), mix(1), mix(2))
}

const WIDTH: f64 = 860.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 130.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 60.0;

pub fn plot_svg(
    states: &[&FlowState],
    field: PlotField,
    markers: Option<&SignalMarkers>,
) -> String {
    let (vmin, vmax) = value_range(states, field);
    let span = if vmax > vmin { vmax - vmin } else { 1.0 };
    let t0 = states.first().map_or(0.0, |s| s.t);
    let t1 = states.last().map_or(1.0, |s| s.t);
    let t_span = if t1 > t0 { t1 - t0 } else { 1.0 };
    let (x_lo, x_hi) = states
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), s| {
            (a.min(s.grid.x_min()), b.max(s.grid.x_max()))
        });
    let x_span = if x_hi > x_lo { x_hi - x_lo } else { 1.0 };
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let px = |t: f64| LEFT + (t - t0) / t_span * pw;
    let py = |x: f64| TOP + ph - (x - x_lo) / x_span * ph;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<g class="heatmap" shape-rendering="crispEdges">"#);
    for (k, s) in states.iter().enumerate() {
        // Each snapshot fills the time strip up to the next one.
        let ta = s.t;
        let tb = states
            .get(k + 1)
            .map_or(s.t + t_span / states.len() as f64, |n| n.t);
        let (xa, xb) = (px(ta), px(tb.min(t1)).max(px(ta) + 0.5));
        let faces = s.grid.faces();
        for (i, v) in field.values(s).iter().enumerate() {
            let (ya, yb) = (py(faces[i + 1]), py(faces[i]));
            let _ = writeln!(
                svg,
                r#"<rect x="{xa:.2}" y="{ya:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                xb - xa,
                yb - ya,
                color((v - vmin) / span)
            );
        }
    }
    let _ = writeln!(svg, "</g>");

    // Axes.
    let _ = writeln!(
        svg,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for k in 0..=5 {
        let t = t0 + t_span * k as f64 / 5.0;
        let x = x_lo + x_span * k as f64 / 5.0;
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            px(t),
            TOP + ph + 18.0,
            trim(t)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 6.0,
            py(x) + 4.0,
            trim(x)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text class="axis-label" x="{:.2}" y="{:.2}" text-anchor="middle">time t (s)</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 15.0
    );
    let _ = writeln!(
        svg,
        r#"<text class="axis-label" transform="translate(20 {:.2}) rotate(-90)" text-anchor="middle">position x (m)</text>"#,
        TOP + ph / 2.0
    );

    if let Some(m) = markers {
        for (t, label) in [
            (m.braking_start, "braking"),
            (m.red_start, "red"),
            (m.green_start, "green"),
        ] {
            if t < t0 || t > t1 {
                continue;
            }
            let x = px(t);
            let _ = writeln!(
                svg,
                r#"<line class="marker" x1="{x:.2}" y1="{TOP}" x2="{x:.2}" y2="{:.2}" stroke="red" stroke-dasharray="4 3"/>"#,
                TOP + ph
            );
            let _ = writeln!(
                svg,
                r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle" fill="red">{label}</text>"#,
                TOP - 8.0
            );
        }
    }

    // Legend.
    let lx = WIDTH - RIGHT + 30.0;
    let steps = 40;
    for k in 0..steps {
        let u = 1.0 - k as f64 / steps as f64;
        let y = TOP + ph * k as f64 / steps as f64;
        let _ = writeln!(
            svg,
            r#"<rect x="{lx}" y="{y:.2}" width="20" height="{:.2}" fill="{}"/>"#,
            ph / steps as f64 + 0.5,
            color(u)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text class="legend-max" x="{:.2}" y="{:.2}">{vmax:?}</text>"#,
        lx + 24.0,
        TOP + 10.0
    );
    let _ = writeln!(
        svg,
        r#"<text class="legend-min" x="{:.2}" y="{:.2}">{vmin:?}</text>"#,
        lx + 24.0,
        TOP + ph
    );
    let _ = writeln!(
        svg,
        r#"<text x="{lx}" y="{:.2}">{}</text>"#,
        TOP + ph + 18.0,
        field.label()
    );
    svg.push_str("</svg>\n");
    svg
}

fn trim(v: f64) -> String {
    let s = format!("{v:.2}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// Writes `<stem>.csv` and `<stem>.svg` next to each other.
pub fn emit_plot(
    states: &[&FlowState],
    field: PlotField,
    markers: Option<&SignalMarkers>,
    csv_path: &Path,
    svg_path: &Path,
) -> Result<(), IoError> {
    fs::write(csv_path, plot_csv(states, field)).map_err(|e| IoError::io(csv_path, e))?;
    fs::write(svg_path, plot_svg(states, field, markers)).map_err(|e| IoError::io(svg_path, e))
}
