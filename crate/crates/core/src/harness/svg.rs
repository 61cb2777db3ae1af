//! Hand-written SVG for the two figure types. Coordinates are printed with
//! fixed precision so identical inputs give identical bytes.

use std::fmt::Write as _;

use super::trace::TraceRecord;
use crate::geometry::Vec2;
use crate::world::{ToolKind, WorldConfig};

const PALETTE: [&str; 8] = [
    "#4c78a8", "#f58518", "#54a24b", "#e45756", "#72b7b2", "#b279a2", "#9d755d", "#eeca3b",
];
const STANDARD_COLOR: &str = "#4c78a8";
const SEMANTIC_COLOR: &str = "#f58518";

fn kind_color(kind: ToolKind) -> &'static str {
    match kind {
        ToolKind::Standard => STANDARD_COLOR,
        ToolKind::Semantic => SEMANTIC_COLOR,
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Maps arena metres to canvas pixels, y pointing up.
struct ArenaFrame {
    margin: f64,
    scale: f64,
    arena: f64,
}

impl ArenaFrame {
    fn pt(&self, p: Vec2) -> (f64, f64) {
        (self.margin + p.x * self.scale, self.margin + (self.arena - p.y) * self.scale)
    }

    fn len(&self, metres: f64) -> f64 {
        metres * self.scale
    }
}

fn polyline(points: &[(f64, f64)]) -> String {
    let mut s = String::new();
    for (i, (x, y)) in points.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{x:.2},{y:.2}");
    }
    s
}

/// Arena, kind-coded server discs, believed (dashed) and true (solid) paths,
/// and a marker at each executed tool call.
pub fn render_trajectory(cfg: &WorldConfig, records: &[TraceRecord], title: &str) -> String {
    let size = 640.0;
    let margin = 40.0;
    let f = ArenaFrame {
        margin,
        scale: (size - 2.0 * margin) / cfg.arena_size,
        arena: cfg.arena_size,
    };
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{h}" viewBox="0 0 {size} {h}" font-family="sans-serif" font-size="11">"#,
        h = size + 40.0
    );
    let _ = writeln!(s, r##"<rect x="0" y="0" width="{size}" height="{h}" fill="#ffffff"/>"##, h = size + 40.0);
    let _ = writeln!(s, r#"<text x="{margin}" y="24" font-size="14">{}</text>"#, escape(title));
    let (ax, ay) = f.pt(Vec2::new(0.0, cfg.arena_size));
    let _ = writeln!(
        s,
        r##"<rect x="{ax:.2}" y="{ay:.2}" width="{w:.2}" height="{w:.2}" fill="#fafafa" stroke="#888888"/>"##,
        w = f.len(cfg.arena_size)
    );
    for srv in &cfg.servers {
        let (cx, cy) = f.pt(srv.position);
        let c = kind_color(srv.kind);
        let _ = writeln!(
            s,
            r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="{r:.2}" fill="{c}" fill-opacity="0.15" stroke="{c}" stroke-width="1"/>"#,
            r = f.len(srv.range)
        );
        let _ = writeln!(s, r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="3" fill="{c}"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{x:.2}" y="{y:.2}" fill="{c}">{} #{}</text>"#,
            srv.kind,
            srv.index,
            x = cx + 5.0,
            y = cy - 5.0
        );
    }
    let (gx, gy) = f.pt(cfg.goal_pos);
    let _ = writeln!(
        s,
        r##"<circle cx="{gx:.2}" cy="{gy:.2}" r="{r:.2}" fill="#54a24b" fill-opacity="0.3" stroke="#54a24b"/>"##,
        r = f.len(cfg.goal_radius).max(2.0)
    );
    let (sx, sy) = f.pt(cfg.start_pos);
    let _ = writeln!(s, r##"<circle cx="{sx:.2}" cy="{sy:.2}" r="4" fill="#333333"/>"##);

    let mut believed = vec![f.pt(cfg.start_pos)];
    let mut truth = vec![f.pt(cfg.start_pos)];
    believed.extend(records.iter().map(|r| f.pt(r.pos_believed)));
    truth.extend(records.iter().map(|r| f.pt(r.pos_true)));
    let _ = writeln!(
        s,
        r##"<polyline points="{}" fill="none" stroke="#333333" stroke-width="1.5" stroke-dasharray="5,4"/>"##,
        polyline(&believed)
    );
    let _ = writeln!(
        s,
        r##"<polyline points="{}" fill="none" stroke="#e45756" stroke-width="1.5"/>"##,
        polyline(&truth)
    );
    // A call happens at the believed position before its step.
    for (i, r) in records.iter().enumerate() {
        let Some(kind) = r.server_kind else { continue };
        let (x, y) = believed[i];
        let c = kind_color(kind);
        let fill = if r.missed { "none" } else { c };
        let _ = writeln!(
            s,
            r#"<path d="M {x0:.2} {y:.2} L {x:.2} {y0:.2} L {x1:.2} {y:.2} L {x:.2} {y1:.2} Z" fill="{fill}" stroke="{c}" stroke-width="1.5"/>"#,
            x0 = x - 6.0,
            x1 = x + 6.0,
            y0 = y - 6.0,
            y1 = y + 6.0
        );
    }
    for (i, r) in records.iter().enumerate() {
        if r.overridden {
            let (x, y) = believed[i];
            let _ = writeln!(
                s,
                r##"<path d="M {a:.2} {b:.2} L {c:.2} {d:.2} M {a:.2} {d:.2} L {c:.2} {b:.2}" stroke="#b279a2" stroke-width="1.5"/>"##,
                a = x - 4.0,
                b = y - 4.0,
                c = x + 4.0,
                d = y + 4.0
            );
        }
    }
    let ly = size + 10.0;
    let legend = [
        ("#333333", "believed path (dashed)"),
        ("#e45756", "true path"),
        (STANDARD_COLOR, "standard tool"),
        (SEMANTIC_COLOR, "semantic tool"),
        ("#b279a2", "shield override"),
    ];
    for (i, (c, label)) in legend.iter().enumerate() {
        let x = margin + i as f64 * 115.0;
        let _ = writeln!(s, r#"<rect x="{x:.2}" y="{y:.2}" width="10" height="10" fill="{c}"/>"#, y = ly - 9.0);
        let _ = writeln!(s, r#"<text x="{tx:.2}" y="{ly:.2}">{label}</text>"#, tx = x + 14.0);
    }
    s.push_str("</svg>\n");
    s
}

/// One method's learning curves, one run per seed.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSeries {
    pub label: String,
    /// Each run is a list of (env steps, mean return).
    pub runs: Vec<Vec<(f64, f64)>>,
}

/// A method drawn as a horizontal line (non-learning baselines).
#[derive(Debug, Clone, PartialEq)]
pub struct FlatLine {
    pub label: String,
    pub value: f64,
}

fn nice_ticks(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if !(hi > lo) {
        return vec![lo];
    }
    let raw = (hi - lo) / n as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 2.5, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-9 * step {
        out.push(t);
        t += step;
    }
    out
}

fn tick_label(v: f64) -> String {
    if v.abs() >= 1e6 {
        format!("{:.1}M", v / 1e6)
    } else if v.abs() >= 1e4 {
        format!("{:.0}k", v / 1e3)
    } else {
        format!("{v:.0}")
    }
}

/// Learning curves with a shaded min–max band across seeds and the seed
/// mean as a line; baselines as flat dashed lines.
pub fn render_curves(series: &[CurveSeries], baselines: &[FlatLine], title: &str) -> String {
    let (w, h) = (760.0, 460.0);
    let (left, right, top, bottom) = (70.0, 190.0, 40.0, 50.0);
    // Per series: x, min, max, mean at each aligned index.
    let bands: Vec<Vec<(f64, f64, f64, f64)>> = series
        .iter()
        .map(|sr| {
            let len = sr.runs.iter().map(Vec::len).max().unwrap_or(0);
            (0..len)
                .filter_map(|i| {
                    let pts: Vec<(f64, f64)> =
                        sr.runs.iter().filter_map(|r| r.get(i)).copied().filter(|p| p.1.is_finite()).collect();
                    if pts.is_empty() {
                        return None;
                    }
                    let x = pts[0].0;
                    let lo = pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
                    let hi = pts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
                    let mean = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
                    Some((x, lo, hi, mean))
                })
                .collect()
        })
        .collect();
    let xs = bands.iter().flatten().map(|b| b.0);
    let x_max = xs.fold(0.0f64, f64::max).max(1.0);
    let ys = bands
        .iter()
        .flatten()
        .flat_map(|b| [b.1, b.2])
        .chain(baselines.iter().map(|b| b.value))
        .filter(|v| v.is_finite());
    let (mut y_min, mut y_max) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !y_min.is_finite() {
        (y_min, y_max) = (0.0, 1.0);
    }
    if y_max - y_min < 1e-9 {
        y_min -= 1.0;
        y_max += 1.0;
    }
    let pad = 0.05 * (y_max - y_min);
    let (y_lo, y_hi) = (y_min - pad, y_max + pad);
    let pw = w - left - right;
    let ph = h - top - bottom;
    let px = |x: f64| left + x / x_max * pw;
    let py = |y: f64| top + (y_hi - y) / (y_hi - y_lo) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r##"<rect x="0" y="0" width="{w}" height="{h}" fill="#ffffff"/>"##);
    let _ = writeln!(s, r#"<text x="{left}" y="24" font-size="14">{}</text>"#, escape(title));
    let _ = writeln!(
        s,
        r##"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#888888"/>"##
    );
    for t in nice_ticks(y_lo, y_hi, 6) {
        let y = py(t);
        let _ = writeln!(
            s,
            r##"<line x1="{left}" y1="{y:.2}" x2="{x2:.2}" y2="{y:.2}" stroke="#eeeeee"/>"##,
            x2 = left + pw
        );
        let _ = writeln!(
            s,
            r#"<text x="{x:.2}" y="{ty:.2}" text-anchor="end">{}</text>"#,
            tick_label(t),
            x = left - 6.0,
            ty = y + 4.0
        );
    }
    for t in nice_ticks(0.0, x_max, 5) {
        let x = px(t);
        let _ = writeln!(
            s,
            r#"<text x="{x:.2}" y="{y:.2}" text-anchor="middle">{}</text>"#,
            tick_label(t),
            y = top + ph + 16.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{x:.2}" y="{y:.2}" text-anchor="middle">environment steps</text>"#,
        x = left + pw / 2.0,
        y = h - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{y:.2}" text-anchor="middle" transform="rotate(-90 16 {y:.2})">mean episodic return</text>"#,
        y = top + ph / 2.0
    );

    let mut legend: Vec<(String, &str, bool)> = Vec::new();
    for (i, b) in baselines.iter().enumerate() {
        let c = PALETTE[i % PALETTE.len()];
        let y = py(b.value);
        let _ = writeln!(
            s,
            r#"<line x1="{left}" y1="{y:.2}" x2="{x2:.2}" y2="{y:.2}" stroke="{c}" stroke-width="1.5" stroke-dasharray="6,4"/>"#,
            x2 = left + pw
        );
        legend.push((b.label.clone(), c, true));
    }
    for (i, (sr, band)) in series.iter().zip(&bands).enumerate() {
        let c = PALETTE[(baselines.len() + i) % PALETTE.len()];
        if band.len() > 1 {
            let mut poly: Vec<(f64, f64)> = band.iter().map(|b| (px(b.0), py(b.2))).collect();
            poly.extend(band.iter().rev().map(|b| (px(b.0), py(b.1))));
            let _ = writeln!(
                s,
                r#"<polygon points="{}" fill="{c}" fill-opacity="0.2" stroke="none"/>"#,
                polyline(&poly)
            );
        }
        let mean: Vec<(f64, f64)> = band.iter().map(|b| (px(b.0), py(b.3))).collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{c}" stroke-width="2"/>"#,
            polyline(&mean)
        );
        legend.push((sr.label.clone(), c, false));
    }
    for (i, (label, c, dashed)) in legend.iter().enumerate() {
        let y = top + 10.0 + i as f64 * 18.0;
        let x = left + pw + 14.0;
        let dash = if *dashed { r#" stroke-dasharray="6,4""# } else { "" };
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{y:.2}" x2="{x2:.2}" y2="{y:.2}" stroke="{c}" stroke-width="2"{dash}/>"#,
            x2 = x + 24.0
        );
        let _ = writeln!(s, r#"<text x="{tx:.2}" y="{ty:.2}">{}</text>"#, escape(label), tx = x + 30.0, ty = y + 4.0);
    }
    s.push_str("</svg>\n");
    s
}
