//! Minimal static SVG plots: stacked line panels and a diverging heatmap.
//!
//! Coordinates are printed with fixed precision so output is byte-stable.

use std::fmt::Write;

const PANEL_W: f64 = 520.0;
const PANEL_H: f64 = 240.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 36.0;
const MARGIN_B: f64 = 46.0;

pub struct Series<'a> {
    pub label: &'a str,
    pub x: &'a [f64],
    pub y: &'a [f64],
    pub color: &'a str,
    pub dashed: bool,
}

pub struct Panel<'a> {
    pub title: String,
    pub series: Vec<Series<'a>>,
    /// Horizontal guide, e.g. the shot-noise level.
    pub guide: Option<f64>,
}

/// Round-number tick positions covering `[lo, hi]`.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = hi - lo;
    if !(span > 0.0) {
        return vec![lo];
    }
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| span / s <= 6.0)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn label(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if (1e-3..1e4).contains(&a) {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.1e}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn finite_range<'a>(values: impl Iterator<Item = &'a f64>) -> Option<(f64, f64)> {
    values
        .filter(|v| v.is_finite())
        .fold(None, |acc, &v| match acc {
            None => Some((v, v)),
            Some((a, b)) => Some((a.min(v), b.max(v))),
        })
}

/// Vertically stacked panels sharing an x axis label.
pub fn line_panels(title: &str, x_label: &str, panels: &[Panel]) -> String {
    let width = MARGIN_L + PANEL_W + MARGIN_R;
    let height = panels.len() as f64 * (PANEL_H + MARGIN_T + MARGIN_B) + 30.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        width / 2.0,
        escape(title)
    );
    for (k, panel) in panels.iter().enumerate() {
        let top = 30.0 + k as f64 * (PANEL_H + MARGIN_T + MARGIN_B) + MARGIN_T;
        panel_svg(&mut s, panel, top, x_label);
    }
    s.push_str("</svg>\n");
    s
}

fn panel_svg(s: &mut String, panel: &Panel, top: f64, x_label: &str) {
    let xr = finite_range(panel.series.iter().flat_map(|c| c.x.iter()));
    let yr = finite_range(
        panel
            .series
            .iter()
            .flat_map(|c| c.y.iter())
            .chain(panel.guide.iter()),
    );
    let (Some((x0, x1)), Some((mut y0, mut y1))) = (xr, yr) else {
        return;
    };
    let pad = 0.05 * (y1 - y0).max(1e-12 * y1.abs().max(1.0));
    y0 -= pad;
    y1 += pad;
    let left = MARGIN_L;
    let px = |x: f64| left + (x - x0) / (x1 - x0).max(f64::MIN_POSITIVE) * PANEL_W;
    let py = |y: f64| top + PANEL_H - (y - y0) / (y1 - y0) * PANEL_H;
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="12">{}</text>"#,
        left + PANEL_W / 2.0,
        top - 8.0,
        escape(&panel.title)
    );
    let _ = writeln!(
        s,
        r##"<rect x="{left:.1}" y="{top:.1}" width="{PANEL_W:.1}" height="{PANEL_H:.1}" fill="none" stroke="#444"/>"##
    );
    for t in ticks(x0, x1) {
        let x = px(t);
        let _ = writeln!(
            s,
            r##"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="#444"/><text x="{x:.1}" y="{:.1}" text-anchor="middle">{}</text>"##,
            top + PANEL_H,
            top + PANEL_H + 4.0,
            top + PANEL_H + 16.0,
            label(t)
        );
    }
    for t in ticks(y0, y1) {
        let y = py(t);
        let _ = writeln!(
            s,
            r##"<line x1="{:.1}" y1="{y:.1}" x2="{left:.1}" y2="{y:.1}" stroke="#444"/><text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"##,
            left - 4.0,
            left - 6.0,
            y + 4.0,
            label(t)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        left + PANEL_W / 2.0,
        top + PANEL_H + 32.0,
        escape(x_label)
    );
    if let Some(g) = panel.guide {
        let y = py(g);
        let _ = writeln!(
            s,
            r##"<line x1="{left:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#999" stroke-dasharray="2,3"/>"##,
            left + PANEL_W
        );
    }
    for (i, c) in panel.series.iter().enumerate() {
        let mut d = String::new();
        let mut pen_down = false;
        for (x, y) in c.x.iter().zip(c.y) {
            if !(x.is_finite() && y.is_finite()) {
                pen_down = false;
                continue;
            }
            let _ = write!(d, "{}{:.2},{:.2}", if pen_down { " L" } else { " M" }, px(*x), py(*y));
            pen_down = true;
        }
        let dash = if c.dashed { r#" stroke-dasharray="6,4""# } else { "" };
        let _ = writeln!(
            s,
            r#"<path d="{}" fill="none" stroke="{}" stroke-width="1.2"{dash}/>"#,
            d.trim_start(),
            c.color
        );
        let ly = top + 14.0 + 14.0 * i as f64;
        let lx = left + PANEL_W - 150.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="{}"{dash}/><text x="{:.1}" y="{ly:.1}">{}</text>"#,
            ly - 4.0,
            lx + 20.0,
            ly - 4.0,
            c.color,
            lx + 26.0,
            escape(c.label)
        );
    }
}

/// Diverging color: reds above `split`, blues below, white at the split.
/// Intensity is quantized to 32 levels so neighbouring cells can merge.
fn diverging(v: f64, split: f64, lo: f64, hi: f64) -> (u8, u8, u8) {
    let level = |t: f64| ((t.clamp(0.0, 1.0) * 32.0).round() / 32.0 * 255.0) as u8;
    if v >= split {
        let t = if hi > split { (v - split) / (hi - split) } else { 0.0 };
        let k = 255 - level(t);
        (255, k, k)
    } else {
        let t = if lo < split { (split - v) / (split - lo) } else { 0.0 };
        let k = 255 - level(t);
        (k, k, 255)
    }
}

/// Heatmap of `values[row][col]` with rows along `y` and columns along `x`,
/// color split at `split`. Wide inputs are decimated to at most 512 columns.
pub fn heatmap(title: &str, x_label: &str, y_label: &str, x: &[f64], y: &[f64], values: &[Vec<f64>], split: f64) -> String {
    let cols = x.len();
    let rows = y.len();
    let stride = cols.div_ceil(512).max(1);
    let picked: Vec<usize> = (0..cols).step_by(stride).collect();
    let (w, h) = (PANEL_W, PANEL_H * 1.5);
    let width = MARGIN_L + w + 90.0;
    let height = MARGIN_T + h + MARGIN_B;
    let (lo, hi) = finite_range(values.iter().flatten()).unwrap_or((split, split));
    let cw = w / picked.len().max(1) as f64;
    let ch = h / rows.max(1) as f64;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" font-family="sans-serif" font-size="11" shape-rendering="crispEdges">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        MARGIN_L + w / 2.0,
        escape(title)
    );
    for (r, row) in values.iter().enumerate() {
        // row 0 at the bottom
        let top = MARGIN_T + h - (r + 1) as f64 * ch;
        let mut start = 0;
        while start < picked.len() {
            let color = diverging(row[picked[start]], split, lo, hi);
            let mut end = start + 1;
            while end < picked.len() && diverging(row[picked[end]], split, lo, hi) == color {
                end += 1;
            }
            let _ = writeln!(
                s,
                r##"<rect x="{:.2}" y="{top:.2}" width="{:.2}" height="{:.2}" fill="#{:02x}{:02x}{:02x}"/>"##,
                MARGIN_L + start as f64 * cw,
                (end - start) as f64 * cw + 0.05,
                ch + 0.05,
                color.0,
                color.1,
                color.2
            );
            start = end;
        }
    }
    let _ = writeln!(
        s,
        r##"<rect x="{MARGIN_L:.1}" y="{MARGIN_T:.1}" width="{w:.1}" height="{h:.1}" fill="none" stroke="#444"/>"##
    );
    if let (Some(&x0), Some(&x1)) = (x.first(), x.last()) {
        for t in ticks(x0, x1) {
            let px = MARGIN_L + (t - x0) / (x1 - x0).max(f64::MIN_POSITIVE) * w;
            let _ = writeln!(
                s,
                r#"<text x="{px:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
                MARGIN_T + h + 16.0,
                label(t)
            );
        }
    }
    if let (Some(&y0), Some(&y1)) = (y.first(), y.last()) {
        for t in ticks(y0, y1) {
            let py = MARGIN_T + h - (t - y0) / (y1 - y0).max(f64::MIN_POSITIVE) * h;
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
                MARGIN_L - 6.0,
                py + 4.0,
                label(t)
            );
        }
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        MARGIN_L + w / 2.0,
        MARGIN_T + h + 34.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
        MARGIN_T + h / 2.0,
        MARGIN_T + h / 2.0,
        escape(y_label)
    );
    // color bar
    let bx = MARGIN_L + w + 20.0;
    for k in 0..64 {
        let v = lo + (hi - lo) * (k as f64 + 0.5) / 64.0;
        let c = diverging(v, split, lo, hi);
        let _ = writeln!(
            s,
            r##"<rect x="{bx:.1}" y="{:.2}" width="14" height="{:.2}" fill="#{:02x}{:02x}{:02x}"/>"##,
            MARGIN_T + h - (k + 1) as f64 * h / 64.0,
            h / 64.0 + 0.05,
            c.0,
            c.1,
            c.2
        );
    }
    for v in [lo, split, hi] {
        if v < lo || v > hi {
            continue;
        }
        let py = MARGIN_T + h - (v - lo) / (hi - lo).max(f64::MIN_POSITIVE) * h;
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}">{}</text>"#, bx + 18.0, py + 4.0, label(v));
    }
    s.push_str("</svg>\n");
    s
}
