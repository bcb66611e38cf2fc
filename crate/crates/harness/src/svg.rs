//! Minimal SVG charts. CSV files are the contract; these are for a quick look.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 52.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    /// Half-widths of error bars, parallel to `points`.
    pub errors: Option<Vec<f64>>,
    pub dashed: bool,
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn new(xs: impl Iterator<Item = f64> + Clone, ys: impl Iterator<Item = f64> + Clone) -> Self {
        let (x0, x1) = bounds(xs);
        let (y0, y1) = bounds(ys);
        Frame { x0, x1, y0, y1 }
    }

    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x0) / (self.x1 - self.x0) * (W - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        H - BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (H - TOP - BOTTOM)
    }
}

fn bounds(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = vals
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn header(out: &mut String, title: &str, xlabel: &str, ylabel: &str, f: &Frame) {
    let _ = write!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = write!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = write!(
        out,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        (LEFT + W - RIGHT) / 2.0,
        escape(title)
    );
    let (bx, by) = (H - BOTTOM, W - RIGHT);
    let _ = write!(
        out,
        r#"<path d="M{LEFT},{TOP} V{bx} H{by}" fill="none" stroke="black"/>"#
    );
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let xv = f.x0 + t * (f.x1 - f.x0);
        let yv = f.y0 + t * (f.y1 - f.y0);
        let (px, py) = (f.px(xv), f.py(yv));
        let _ = write!(
            out,
            r#"<line x1="{px:.1}" y1="{bx}" x2="{px:.1}" y2="{}" stroke="black"/><text x="{px:.1}" y="{}" text-anchor="middle">{}</text>"#,
            bx + 4.0,
            bx + 16.0,
            tick(xv)
        );
        let _ = write!(
            out,
            r#"<line x1="{}" y1="{py:.1}" x2="{LEFT}" y2="{py:.1}" stroke="black"/><text x="{}" y="{:.1}" text-anchor="end">{}</text>"#,
            LEFT - 4.0,
            LEFT - 6.0,
            py + 4.0,
            tick(yv)
        );
    }
    let _ = write!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        (LEFT + W - RIGHT) / 2.0,
        H - 12.0,
        escape(xlabel)
    );
    let _ = write!(
        out,
        r#"<text transform="translate(16,{}) rotate(-90)" text-anchor="middle">{}</text>"#,
        (TOP + H - BOTTOM) / 2.0,
        escape(ylabel)
    );
}

fn tick(v: f64) -> String {
    if v.abs() >= 1000.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.3}")
    }
}

fn legend(out: &mut String, names: &[(&str, &str)]) {
    for (i, (name, color)) in names.iter().enumerate() {
        let y = TOP + 10.0 + i as f64 * 16.0;
        let x = W - RIGHT + 12.0;
        let _ = write!(
            out,
            r#"<rect x="{x}" y="{}" width="10" height="10" fill="{color}"/><text x="{}" y="{}">{}</text>"#,
            y - 8.0,
            x + 14.0,
            y + 1.0,
            escape(name)
        );
    }
}

/// Line chart with optional error bars.
pub fn line_chart(title: &str, xlabel: &str, ylabel: &str, series: &[Series]) -> String {
    let all = series.iter().flat_map(|s| {
        s.points.iter().enumerate().flat_map(move |(i, &(x, y))| {
            let e = s.errors.as_ref().map_or(0.0, |e| e[i]);
            [(x, y - e), (x, y + e)]
        })
    });
    let f = Frame::new(all.clone().map(|p| p.0), all.map(|p| p.1));
    let mut out = String::new();
    header(&mut out, title, xlabel, ylabel, &f);
    let mut names = vec![];
    for (k, s) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        names.push((s.name.as_str(), color));
        let d: Vec<String> = s
            .points
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| format!("{}{:.1},{:.1}", if i == 0 { 'M' } else { 'L' }, f.px(x), f.py(y)))
            .collect();
        let dash = if s.dashed { r#" stroke-dasharray="6,4""# } else { "" };
        let _ = write!(
            out,
            r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>"#,
            d.join(" ")
        );
        for (i, &(x, y)) in s.points.iter().enumerate() {
            let _ = write!(
                out,
                r#"<circle cx="{:.1}" cy="{:.1}" r="2.5" fill="{color}"/>"#,
                f.px(x),
                f.py(y)
            );
            if let Some(e) = s.errors.as_ref().map(|e| e[i]).filter(|&e| e > 0.0) {
                let _ = write!(
                    out,
                    r#"<line x1="{0:.1}" y1="{1:.1}" x2="{0:.1}" y2="{2:.1}" stroke="{color}"/>"#,
                    f.px(x),
                    f.py(y - e),
                    f.py(y + e)
                );
            }
        }
    }
    legend(&mut out, &names);
    out.push_str("</svg>\n");
    out
}

/// Scatter plot; points flagged in `highlight` are drawn in a second color.
pub fn scatter(
    title: &str,
    xlabel: &str,
    ylabel: &str,
    points: &[(f64, f64)],
    highlight: Option<(&[bool], &str, &str)>,
) -> String {
    let f = Frame::new(points.iter().map(|p| p.0), points.iter().map(|p| p.1));
    let mut out = String::new();
    header(&mut out, title, xlabel, ylabel, &f);
    for (i, &(x, y)) in points.iter().enumerate() {
        let hot = highlight.is_some_and(|(h, _, _)| h[i]);
        let color = if hot { PALETTE[1] } else { PALETTE[0] };
        let _ = write!(
            out,
            r#"<circle cx="{:.1}" cy="{:.1}" r="2" fill="{color}" fill-opacity="0.6"/>"#,
            f.px(x),
            f.py(y)
        );
    }
    if let Some((_, base, hot)) = highlight {
        legend(&mut out, &[(base, PALETTE[0]), (hot, PALETTE[1])]);
    }
    out.push_str("</svg>\n");
    out
}

/// Histogram from precomputed bin edges and one or two stacked value rows.
pub fn histogram(
    title: &str,
    xlabel: &str,
    ylabel: &str,
    edges: &[(f64, f64)],
    layers: &[(&str, Vec<f64>)],
) -> String {
    let tops: Vec<f64> = (0..edges.len())
        .map(|i| layers.iter().map(|(_, v)| v[i].max(0.0)).sum::<f64>())
        .chain(
            (0..edges.len()).map(|i| layers.iter().map(|(_, v)| v[i].min(0.0)).sum::<f64>()),
        )
        .chain(std::iter::once(0.0))
        .collect();
    let f = Frame::new(
        edges.iter().flat_map(|e| [e.0, e.1]),
        tops.iter().copied(),
    );
    let mut out = String::new();
    header(&mut out, title, xlabel, ylabel, &f);
    let mut names = vec![];
    let mut pos = vec![0.0; edges.len()];
    let mut neg = vec![0.0; edges.len()];
    for (k, (name, vals)) in layers.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        names.push((*name, color));
        for (i, &(lo, hi)) in edges.iter().enumerate() {
            let v = vals[i];
            let base = if v >= 0.0 { &mut pos[i] } else { &mut neg[i] };
            let (a, b) = (*base, *base + v);
            *base = b;
            let (ya, yb) = (f.py(a), f.py(b));
            let _ = write!(
                out,
                r#"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="{color}" stroke="white" stroke-width="0.5"/>"#,
                f.px(lo),
                ya.min(yb),
                (f.px(hi) - f.px(lo)).max(0.5),
                (ya - yb).abs()
            );
        }
    }
    legend(&mut out, &names);
    out.push_str("</svg>\n");
    out
}
