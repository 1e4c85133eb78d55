//! Deterministic SVG line plots.

use std::fmt::Write;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        let p = 0.05 * (hi - lo);
        (lo - p, hi + p)
    } else {
        // a flat channel gets a unit window centred on its value
        (lo - 0.5, hi + 0.5)
    }
}

/// Data bounds padded by 5% on each side; `None` when there are no finite points.
pub fn bounds(series: &[Series]) -> Option<Bounds> {
    let pts = series.iter().flat_map(|s| s.points.iter()).filter(|p| p.0.is_finite() && p.1.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    let mut any = false;
    for &(x, y) in pts {
        any = true;
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !any {
        return None;
    }
    let (x0, x1) = padded(x0, x1);
    let (y0, y1) = padded(y0, y1);
    Some(Bounds { x0, x1, y0, y1 })
}

fn num(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

/// Line plot with axes, tick labels and a legend. Byte-stable for identical input.
pub fn plot_svg(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#).unwrap();
    writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#).unwrap();
    writeln!(
        s,
        r#"<text x="{}" y="24" font-family="sans-serif" font-size="16" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    )
    .unwrap();
    let Some(b) = bounds(series) else {
        writeln!(
            s,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="14" text-anchor="middle">no data</text>"#,
            WIDTH / 2.0,
            HEIGHT / 2.0
        )
        .unwrap();
        s.push_str("</svg>\n");
        return s;
    };
    let (pw, ph) = (WIDTH - 2.0 * MARGIN, HEIGHT - 2.0 * MARGIN);
    let px = |x: f64| MARGIN + (x - b.x0) / (b.x1 - b.x0) * pw;
    let py = |y: f64| HEIGHT - MARGIN - (y - b.y0) / (b.y1 - b.y0) * ph;
    writeln!(s, r#"<rect x="{MARGIN}" y="{MARGIN}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#).unwrap();
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let (xv, yv) = (b.x0 + f * (b.x1 - b.x0), b.y0 + f * (b.y1 - b.y0));
        writeln!(
            s,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="middle">{}</text>"#,
            num(px(xv)),
            num(HEIGHT - MARGIN + 16.0),
            format!("{xv:.3e}")
        )
        .unwrap();
        writeln!(
            s,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="end">{}</text>"#,
            num(MARGIN - 4.0),
            num(py(yv) + 4.0),
            format!("{yv:.3e}")
        )
        .unwrap();
    }
    writeln!(
        s,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="13" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    )
    .unwrap();
    writeln!(
        s,
        r#"<text x="16" y="{}" font-family="sans-serif" font-size="13" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(y_label)
    )
    .unwrap();
    for (k, ser) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let pts: Vec<String> = ser
            .points
            .iter()
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .map(|&(x, y)| format!("{},{}", num(px(x)), num(py(y))))
            .collect();
        if !pts.is_empty() {
            writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, pts.join(" ")).unwrap();
        }
        let ly = MARGIN + 16.0 + 16.0 * k as f64;
        writeln!(
            s,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" fill="{color}">{}</text>"#,
            num(WIDTH - MARGIN - 120.0),
            num(ly),
            escape(&ser.label)
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds_pad_five_percent() {
        let s = [Series { label: "a".into(), points: vec![(0.0, -1.0), (2.0, 3.0)] }];
        let b = bounds(&s).unwrap();
        assert_eq!((b.x0, b.x1, b.y0, b.y1), (-0.1, 2.1, -1.2, 3.2));
    }

    #[test]
    fn empty_series_guard() {
        let svg = plot_svg("t", "x", "y", &[Series { label: "a".into(), points: vec![] }]);
        assert!(svg.contains("no data"));
        assert!(svg.ends_with("</svg>\n"));
    }
}
