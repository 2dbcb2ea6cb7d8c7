//! Minimal deterministic SVG charts.
//!
//! Output depends only on the data, so identical runs give byte-identical
//! files. Every chart carries a footer with the digest of its configuration.

use std::fmt::Write as _;

pub const PALETTE: [&str; 4] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728"];

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 70.0;
const MAX_POINTS: usize = 1000;

#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub label: String,
    pub color: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(label: impl Into<String>, color: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Series {
            label: label.into(),
            color: color.into(),
            points,
        }
    }

    /// Curve indexed from t = 1, thinned to at most `MAX_POINTS` points. The
    /// last point is always kept.
    pub fn from_curve(label: impl Into<String>, color: impl Into<String>, ys: &[f64]) -> Self {
        let stride = ys.len().div_ceil(MAX_POINTS).max(1);
        let mut points: Vec<(f64, f64)> = ys
            .iter()
            .enumerate()
            .step_by(stride)
            .map(|(i, &y)| ((i + 1) as f64, y))
            .collect();
        if let Some(&y) = ys.last() {
            if points.last().map(|p| p.0) != Some(ys.len() as f64) {
                points.push((ys.len() as f64, y));
            }
        }
        Series::new(label, color, points)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn fmt(v: f64) -> String {
    format!("{v:.2}")
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1000.0 || v.fract() == 0.0 {
        format!("{v:.0}")
    } else if v.abs() >= 1.0 {
        format!("{v:.1}")
    } else {
        format!("{v:.3}")
    }
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let lo = lo.min(0.0);
    if hi <= lo {
        (lo, lo + 1.0)
    } else {
        (lo, hi)
    }
}

fn open(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#,
        w = WIDTH,
        h = HEIGHT
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        fmt(WIDTH / 2.0),
        escape(title)
    );
}

fn close(out: &mut String, digest: &str) {
    let _ = writeln!(
        out,
        r##"<text x="{}" y="{}" text-anchor="end" font-size="9" fill="#888">config {}</text>"##,
        fmt(WIDTH - 4.0),
        fmt(HEIGHT - 4.0),
        escape(digest)
    );
    out.push_str("</svg>\n");
}

fn axes(out: &mut String, x_label: &str, y_label: &str) {
    let (x0, y0, x1, y1) = (LEFT, HEIGHT - BOTTOM, WIDTH - RIGHT, TOP);
    let _ = writeln!(
        out,
        r#"<path d="M{} {} L{} {} L{} {}" fill="none" stroke="black"/>"#,
        fmt(x0),
        fmt(y1),
        fmt(x0),
        fmt(y0),
        fmt(x1),
        fmt(y0)
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        fmt((x0 + x1) / 2.0),
        fmt(HEIGHT - 30.0),
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        fmt((y0 + y1) / 2.0),
        fmt((y0 + y1) / 2.0),
        escape(y_label)
    );
}

/// Line chart of one or more series sharing both axes.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series], digest: &str) -> String {
    let all = || series.iter().flat_map(|s| s.points.iter());
    let xmin = all().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let xmax = all().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let (xmin, xmax) = if xmin.is_finite() && xmin < xmax {
        (xmin, xmax)
    } else {
        (0.0, 1.0)
    };
    let (ymin, ymax) = range(all().map(|p| p.1));
    let sx = |x: f64| LEFT + (x - xmin) / (xmax - xmin) * (WIDTH - LEFT - RIGHT);
    let sy = |y: f64| HEIGHT - BOTTOM - (y - ymin) / (ymax - ymin) * (HEIGHT - TOP - BOTTOM);

    let mut out = String::new();
    open(&mut out, title);
    axes(&mut out, x_label, y_label);
    for i in 0..=4 {
        let fx = xmin + (xmax - xmin) * i as f64 / 4.0;
        let fy = ymin + (ymax - ymin) * i as f64 / 4.0;
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            fmt(sx(fx)),
            fmt(HEIGHT - BOTTOM + 16.0),
            tick_label(fx)
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            fmt(LEFT - 6.0),
            fmt(sy(fy) + 4.0),
            tick_label(fy)
        );
    }
    for (k, s) in series.iter().enumerate() {
        if s.points.is_empty() {
            continue;
        }
        let mut d = String::new();
        for (j, &(x, y)) in s.points.iter().enumerate() {
            let _ = write!(d, "{}{} {} ", if j == 0 { "M" } else { "L" }, fmt(sx(x)), fmt(sy(y)));
        }
        let _ = writeln!(
            out,
            r#"<path d="{}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
            d.trim_end(),
            s.color
        );
        let ly = TOP + 14.0 + 16.0 * k as f64;
        let lx = WIDTH - RIGHT - 220.0;
        let _ = writeln!(
            out,
            r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="{}" stroke-width="2"/>"#,
            fmt(lx),
            fmt(ly - 4.0),
            fmt(lx + 20.0),
            fmt(ly - 4.0),
            s.color
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}">{}</text>"#,
            fmt(lx + 26.0),
            fmt(ly),
            escape(&s.label)
        );
    }
    close(&mut out, digest);
    out
}

/// Vertical bar chart with one bar per label.
pub fn bar_chart(title: &str, labels: &[String], values: &[f64], digest: &str) -> String {
    let (_, ymax) = range(values.iter().copied());
    let n = values.len().max(1) as f64;
    let slot = (WIDTH - LEFT - RIGHT) / n;
    let sy = |y: f64| HEIGHT - BOTTOM - y / ymax * (HEIGHT - TOP - BOTTOM);

    let mut out = String::new();
    open(&mut out, title);
    axes(&mut out, "cell", "count");
    for i in 0..=4 {
        let fy = ymax * i as f64 / 4.0;
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            fmt(LEFT - 6.0),
            fmt(sy(fy) + 4.0),
            tick_label(fy)
        );
    }
    for (i, (&v, label)) in values.iter().zip(labels).enumerate() {
        let x = LEFT + slot * i as f64;
        let _ = writeln!(
            out,
            r#"<rect x="{}" y="{}" width="{}" height="{}" fill="{}"/>"#,
            fmt(x + slot * 0.1),
            fmt(sy(v)),
            fmt(slot * 0.8),
            fmt(HEIGHT - BOTTOM - sy(v)),
            PALETTE[0]
        );
        let cx = x + slot / 2.0;
        let cy = HEIGHT - BOTTOM + 12.0;
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-size="8" text-anchor="end" transform="rotate(-60 {} {})">{}</text>"#,
            fmt(cx),
            fmt(cy),
            fmt(cx),
            fmt(cy),
            escape(label)
        );
    }
    close(&mut out, digest);
    out
}
