//! Hand-written SVG: learning curves with a ±1 std band, and heatmaps.

use std::fmt::Write as _;

use crate::metrics::AggregatedCurve;

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

const W: f64 = 640.0;
const H: f64 = 400.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Line plot of one or more aggregated curves. The y range is `[0, 1]`
/// unless some band leaves it.
pub fn learning_curves(title: &str, y_label: &str, curves: &[(&str, &AggregatedCurve)]) -> String {
    let pts = curves.iter().flat_map(|(_, c)| c.points.iter());
    let (mut x_min, mut x_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y_min, mut y_max) = (0.0f64, 1.0f64);
    for p in pts {
        x_min = x_min.min(f64::from(p.epoch));
        x_max = x_max.max(f64::from(p.epoch));
        if p.mean.is_finite() {
            y_min = y_min.min(p.mean - p.std);
            y_max = y_max.max(p.mean + p.std);
        }
    }
    if !x_min.is_finite() {
        (x_min, x_max) = (0.0, 1.0);
    }
    if x_max <= x_min {
        x_max = x_min + 1.0;
    }
    let plot_w = W - LEFT - RIGHT;
    let plot_h = H - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x_min) / (x_max - x_min) * plot_w;
    let sy = |y: f64| TOP + (1.0 - (y - y_min) / (y_max - y_min)) * plot_h;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="18" text-anchor="middle" font-size="14">{}</text>"#,
        LEFT + plot_w / 2.0,
        escape(title)
    );
    // axes and ticks
    let _ = writeln!(
        s,
        r#"<path d="M{LEFT} {TOP} V{} H{}" fill="none" stroke="black"/>"#,
        TOP + plot_h,
        LEFT + plot_w
    );
    for i in 0..=5 {
        let y = y_min + (y_max - y_min) * f64::from(i) / 5.0;
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" x2="{}" y1="{y:.2}" y2="{y:.2}" stroke="#ddd"/><text x="{}" y="{:.2}" text-anchor="end">{:.2}</text>"##,
            LEFT + plot_w,
            LEFT - 6.0,
            sy(y) + 4.0,
            y,
            y = sy(y)
        );
    }
    for i in 0..=5 {
        let x = x_min + (x_max - x_min) * f64::from(i) / 5.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{}" text-anchor="middle">{:.0}</text>"#,
            sx(x),
            TOP + plot_h + 18.0,
            x
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">epoch</text>"#,
        LEFT + plot_w / 2.0,
        H - 10.0
    );
    let _ = writeln!(
        s,
        r#"<text transform="translate(16 {}) rotate(-90)" text-anchor="middle">{}</text>"#,
        TOP + plot_h / 2.0,
        escape(y_label)
    );

    for (i, (label, curve)) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let finite: Vec<_> = curve.points.iter().filter(|p| p.mean.is_finite()).collect();
        if finite.is_empty() {
            continue;
        }
        let mut band = String::new();
        for p in &finite {
            let _ = write!(band, "{:.2},{:.2} ", sx(f64::from(p.epoch)), sy(p.mean + p.std));
        }
        for p in finite.iter().rev() {
            let _ = write!(band, "{:.2},{:.2} ", sx(f64::from(p.epoch)), sy(p.mean - p.std));
        }
        let _ = writeln!(
            s,
            r#"<polygon points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
            band.trim_end()
        );
        let line: Vec<String> = finite
            .iter()
            .map(|p| format!("{:.2},{:.2}", sx(f64::from(p.epoch)), sy(p.mean)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            line.join(" ")
        );
        let ly = TOP + 10.0 + 18.0 * i as f64;
        let lx = LEFT + plot_w + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" x2="{}" y1="{ly}" y2="{ly}" stroke="{color}" stroke-width="3"/><text x="{}" y="{}">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(label)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Fill colour and opacity for a ratio: green for positive, red for
/// negative, opacity `min(|r|, 1)`.
pub fn cell_fill(r: f64) -> (&'static str, f64) {
    let color = if r < 0.0 { "#d62728" } else { "#2ca02c" };
    let opacity = if r.is_finite() { r.abs().min(1.0) } else { 0.0 };
    (color, opacity)
}

/// Heatmap of `cells[row][col]`; `None` cells are left blank and marked.
pub fn heatmap(title: &str, rows: &[String], cols: &[String], cells: &[Vec<Option<f64>>]) -> String {
    const CELL: f64 = 80.0;
    const MARGIN: f64 = 110.0;
    let w = MARGIN + CELL * cols.len() as f64 + 20.0;
    let h = MARGIN + CELL * rows.len() as f64 + 20.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="13">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="10" y="20" font-size="14">{}</text>"#, escape(title));
    let _ = writeln!(
        s,
        r#"<text x="10" y="{}" font-size="11">source \ target</text>"#,
        MARGIN - 10.0
    );
    for (j, c) in cols.iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            MARGIN + CELL * (j as f64 + 0.5),
            MARGIN - 10.0,
            escape(c)
        );
    }
    for (i, r) in rows.iter().enumerate() {
        let y = MARGIN + CELL * i as f64;
        let _ = writeln!(
            s,
            r#"<text x="10" y="{}">{}</text>"#,
            y + CELL / 2.0 + 4.0,
            escape(r)
        );
        for j in 0..cols.len() {
            let x = MARGIN + CELL * j as f64;
            let value = cells.get(i).and_then(|row| row.get(j)).copied().flatten();
            let (fill, opacity, text) = match value {
                Some(v) => {
                    let (c, o) = cell_fill(v);
                    (c, o, format!("{v:.3}"))
                }
                None => ("#ffffff", 0.0, "-".to_string()),
            };
            let _ = writeln!(
                s,
                r##"<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="{fill}" fill-opacity="{opacity:.4}" stroke="#888"/><text x="{}" y="{}" text-anchor="middle">{text}</text>"##,
                x + CELL / 2.0,
                y + CELL / 2.0 + 4.0
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curve_plot_has_band_and_line_per_curve() {
        let a = AggregatedCurve::from_series(&[1, 2, 3], &[0.1, 0.5, 0.9]);
        let b = AggregatedCurve::from_series(&[1, 2, 3], &[0.2, 0.2, 0.3]);
        let svg = learning_curves("t", "catch rate", &[("a", &a), ("b<&>", &b)]);
        assert_eq!(svg.matches("<polygon").count(), 2);
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("b&lt;&amp;&gt;"));
        assert!(svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn shading_follows_sign_and_magnitude() {
        let (g, dark) = cell_fill(0.729);
        let (_, light) = cell_fill(0.1);
        assert_eq!(g, "#2ca02c");
        assert!(dark > light);
        assert_eq!(cell_fill(-0.3).0, "#d62728");
        assert_eq!(cell_fill(0.0).1, 0.0);
        assert_eq!(cell_fill(5.0).1, 1.0);
    }
}
