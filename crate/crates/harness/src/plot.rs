//! Minimal SVG output: line plots with error bars and heatmaps.

use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: [f64; 4] = [56.0, 24.0, 36.0, 64.0]; // top, right, bottom, left

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
];

/// Perceptually ordered ramp (dark blue → teal → yellow), interpolated linearly.
const RAMP: [[f64; 3]; 5] = [
    [68.0, 1.0, 84.0],
    [59.0, 82.0, 139.0],
    [33.0, 145.0, 140.0],
    [94.0, 201.0, 98.0],
    [253.0, 231.0, 37.0],
];

#[derive(Debug, Clone)]
pub struct LineSeries {
    pub label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Symmetric error bars, if any.
    pub err: Option<Vec<f64>>,
    pub dashed: bool,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
}

/// Rounded tick positions covering `[lo, hi]`.
fn ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    if !(hi > lo) {
        return vec![lo];
    }
    let raw = (hi - lo) / target as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .into_iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-3 {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        let w = WIDTH - MARGIN[1] - MARGIN[3];
        MARGIN[3] + (x - self.x.0) / (self.x.1 - self.x.0) * w
    }

    fn py(&self, y: f64) -> f64 {
        let h = HEIGHT - MARGIN[0] - MARGIN[2];
        HEIGHT - MARGIN[2] - (y - self.y.0) / (self.y.1 - self.y.0) * h
    }

    fn axes(&self, out: &mut String, xlabel: &str, ylabel: &str) {
        let (x0, x1) = (MARGIN[3], WIDTH - MARGIN[1]);
        let (y0, y1) = (HEIGHT - MARGIN[2], MARGIN[0]);
        let _ = writeln!(
            out,
            r#"<rect x="{x0}" y="{y1}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            x1 - x0,
            y0 - y1
        );
        for t in ticks(self.x.0, self.x.1, 8) {
            let x = self.px(t);
            let _ = writeln!(out, r#"<line x1="{x:.2}" y1="{y0}" x2="{x:.2}" y2="{}" stroke="black"/>"#, y0 + 4.0);
            let _ = writeln!(
                out,
                r#"<text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#,
                y0 + 16.0,
                fmt_tick(t)
            );
        }
        for t in ticks(self.y.0, self.y.1, 6) {
            let y = self.py(t);
            let _ = writeln!(out, r#"<line x1="{}" y1="{y:.2}" x2="{x0}" y2="{y:.2}" stroke="black"/>"#, x0 - 4.0);
            let _ = writeln!(
                out,
                r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#,
                x0 - 6.0,
                y + 4.0,
                fmt_tick(t)
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            (x0 + x1) / 2.0,
            HEIGHT - 4.0,
            escape(xlabel)
        );
        let _ = writeln!(
            out,
            r#"<text transform="translate(14,{}) rotate(-90)" text-anchor="middle">{}</text>"#,
            (y0 + y1) / 2.0,
            escape(ylabel)
        );
    }
}

fn padded_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 * hi.abs().max(1.0) {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

pub fn line_plot(title: &str, xlabel: &str, ylabel: &str, series: &[LineSeries]) -> String {
    let mut out = String::new();
    header(&mut out, title);
    let x = padded_range(series.iter().flat_map(|s| s.x.iter().copied()));
    let y = padded_range(series.iter().flat_map(|s| {
        let e = s.err.clone().unwrap_or_else(|| vec![0.0; s.y.len()]);
        s.y.iter()
            .zip(e)
            .flat_map(|(y, e)| [y - e, y + e])
            .collect::<Vec<_>>()
    }));
    let frame = Frame { x, y };
    frame.axes(&mut out, xlabel, ylabel);
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = s
            .x
            .iter()
            .zip(&s.y)
            .map(|(x, y)| format!("{:.2},{:.2}", frame.px(*x), frame.py(*y)))
            .collect();
        let dash = if s.dashed { r#" stroke-dasharray="6,4""# } else { "" };
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.8"{dash}/>"#,
            pts.join(" ")
        );
        for (j, (x, y)) in s.x.iter().zip(&s.y).enumerate() {
            let (cx, cy) = (frame.px(*x), frame.py(*y));
            let _ = writeln!(out, r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="2.5" fill="{color}"/>"#);
            if let Some(e) = s.err.as_ref().map(|e| e[j]).filter(|e| *e > 0.0) {
                let (top, bot) = (frame.py(y + e), frame.py(y - e));
                let _ = writeln!(
                    out,
                    r#"<path d="M{cx:.2},{top:.2}V{bot:.2}M{:.2},{top:.2}h6M{:.2},{bot:.2}h6" stroke="{color}"/>"#,
                    cx - 3.0,
                    cx - 3.0
                );
            }
        }
        let ly = MARGIN[0] + 14.0 + 16.0 * i as f64;
        let lx = MARGIN[3] + 10.0;
        let _ = writeln!(
            out,
            r#"<line x1="{lx}" y1="{}" x2="{}" y2="{}" stroke="{color}" stroke-width="2"{dash}/><text x="{}" y="{ly}">{}</text>"#,
            ly - 4.0,
            lx + 18.0,
            ly - 4.0,
            lx + 24.0,
            escape(&s.label)
        );
    }
    out.push_str("</svg>\n");
    out
}

pub fn color(t: f64) -> String {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let pos = t * (RAMP.len() - 1) as f64;
    let i = (pos.floor() as usize).min(RAMP.len() - 2);
    let w = pos - i as f64;
    let c: Vec<u8> = (0..3)
        .map(|d| (RAMP[i][d] * (1.0 - w) + RAMP[i + 1][d] * w).round() as u8)
        .collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

/// Heatmap of row-major `values` with `dims.0` rows along x and `dims.1` along y;
/// `extent` gives the axis ranges `[x_lo, x_hi, y_lo, y_hi]` and `scale` the
/// values mapped to the ends of the color ramp.
pub fn heatmap(
    title: &str,
    labels: [&str; 2],
    values: &[f64],
    dims: (usize, usize),
    extent: [f64; 4],
    scale: (f64, f64),
) -> String {
    assert_eq!(values.len(), dims.0 * dims.1, "heatmap values");
    let mut out = String::new();
    header(&mut out, title);
    let frame = Frame {
        x: (extent[0], extent[1]),
        y: (extent[2], extent[3]),
    };
    let cw = (frame.px(extent[1]) - frame.px(extent[0])) / dims.0 as f64;
    let ch = (frame.py(extent[2]) - frame.py(extent[3])) / dims.1 as f64;
    let span = scale.1 - scale.0;
    for j1 in 0..dims.0 {
        for j2 in 0..dims.1 {
            let v = values[j1 * dims.1 + j2];
            let t = if span > 0.0 { (v - scale.0) / span } else { 0.5 };
            let x = frame.px(extent[0]) + j1 as f64 * cw;
            let y = frame.py(extent[2]) - (j2 + 1) as f64 * ch;
            let _ = writeln!(
                out,
                r#"<rect x="{x:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                cw + 0.3,
                ch + 0.3,
                color(t)
            );
        }
    }
    frame.axes(&mut out, labels[0], labels[1]);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="44" text-anchor="end">color scale [{}, {}]</text>"#,
        WIDTH - MARGIN[1],
        fmt_tick(scale.0),
        fmt_tick(scale.1)
    );
    out.push_str("</svg>\n");
    out
}
