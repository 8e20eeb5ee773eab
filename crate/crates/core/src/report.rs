//! Output formatting shared by the report writers: CSV numbers and static SVG plots.

use std::fmt::Write;

use crate::field::ScalarField;

/// 17 significant digits, '.' decimal point; parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 60.0;

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="30" font-family="sans-serif" font-size="16" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Blue-to-red colour ramp for `t` in `[0, 1]`.
fn ramp(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let r = (255.0 * t).round() as u8;
    let b = (255.0 * (1.0 - t)).round() as u8;
    let g = (255.0 * (1.0 - (2.0 * t - 1.0).abs()) * 0.8).round() as u8;
    format!("#{r:02x}{g:02x}{b:02x}")
}

/// Heatmap of a field with one y-axis. Returns `None` for higher dimensions.
pub fn heatmap(field: &ScalarField, title: &str) -> Option<String> {
    let grid = field.grid();
    if grid.dim_y() != 1 {
        return None;
    }
    let (xa, ya) = (grid.axes[0], grid.axes[1]);
    let (lo, hi) = field
        .present()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, v)| (lo.min(v), hi.max(v)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let cw = (WIDTH - 2.0 * MARGIN) / xa.n as f64;
    let ch = (HEIGHT - 2.0 * MARGIN) / ya.n as f64;
    let mut out = String::new();
    header(&mut out, title);
    for i in 0..xa.n {
        for j in 0..ya.n {
            let Some(v) = field.at(grid.flat(&[i, j])) else {
                continue;
            };
            let _ = writeln!(
                out,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                MARGIN + i as f64 * cw,
                HEIGHT - MARGIN - (j + 1) as f64 * ch,
                cw + 0.05,
                ch + 0.05,
                ramp((v - lo) / span)
            );
        }
    }
    axis_labels(&mut out, "x", "y1", (xa.lo, xa.hi), (ya.lo, ya.hi));
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="end">min {} / max {}</text>"#,
        WIDTH - MARGIN,
        HEIGHT - 15.0,
        short(lo),
        short(hi)
    );
    out.push_str("</svg>\n");
    Some(out)
}

/// Polyline of `(x, y)` points; `log_y` plots `log10(y)`.
pub fn line_plot(points: &[(f64, f64)], title: &str, x_label: &str, y_label: &str, log_y: bool) -> String {
    let tr = |v: f64| if log_y { v.log10() } else { v };
    let mut out = String::new();
    header(&mut out, title);
    if points.is_empty() {
        out.push_str("</svg>\n");
        return out;
    }
    let (xlo, xhi) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.0), hi.max(p.0)));
    let (ylo, yhi) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(tr(p.1)), hi.max(tr(p.1)))
        });
    let sx = if xhi > xlo { xhi - xlo } else { 1.0 };
    let sy = if yhi > ylo { yhi - ylo } else { 1.0 };
    let px = |x: f64| MARGIN + (x - xlo) / sx * (WIDTH - 2.0 * MARGIN);
    let py = |y: f64| HEIGHT - MARGIN - (tr(y) - ylo) / sy * (HEIGHT - 2.0 * MARGIN);
    let path: Vec<String> = points
        .iter()
        .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
        .collect();
    let _ = writeln!(
        out,
        r##"<polyline fill="none" stroke="#c0392b" stroke-width="2" points="{}"/>"##,
        path.join(" ")
    );
    for &(x, y) in points {
        let _ = writeln!(
            out,
            r##"<circle cx="{:.2}" cy="{:.2}" r="3" fill="#2c3e50"/>"##,
            px(x),
            py(y)
        );
    }
    let y_name = if log_y { format!("log10 {y_label}") } else { y_label.to_string() };
    axis_labels(&mut out, x_label, &y_name, (xlo, xhi), (ylo, yhi));
    out.push_str("</svg>\n");
    out
}

fn short(v: f64) -> String {
    format!("{v:.4e}")
}

fn axis_labels(out: &mut String, xl: &str, yl: &str, xr: (f64, f64), yr: (f64, f64)) {
    let _ = writeln!(
        out,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        WIDTH - 2.0 * MARGIN,
        HEIGHT - 2.0 * MARGIN
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">{} [{} .. {}]</text>"#,
        WIDTH / 2.0,
        HEIGHT - MARGIN + 20.0,
        escape(xl),
        short(xr.0),
        short(xr.1)
    );
    let _ = writeln!(
        out,
        r#"<text x="15" y="{}" font-family="sans-serif" font-size="12" transform="rotate(-90 15 {})" text-anchor="middle">{} [{} .. {}]</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(yl),
        short(yr.0),
        short(yr.1)
    );
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{FnPoint, Grid};

    #[test]
    fn numbers_round_trip() {
        for v in [0.1, -1.0 / 3.0, 1e-300, 123456789.12345679, 0.0] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_f64(10.0), "1.0000000000000000e1");
    }

    #[test]
    fn svg_outputs_are_well_formed_enough() {
        let g = Grid::cylinder(0.0, 1.0, 1.0, 1, 4, 3).unwrap();
        let f = ScalarField::sample(&g, &FnPoint(|x: f64, y: &[f64]| x + y[0])).unwrap();
        let svg = heatmap(&f, "u").unwrap();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<rect x=").count(), 12 + 1);
        let plot = line_plot(&[(1.0, 4.2), (2.0, 16.1)], "ratio", "lambda", "ratio", true);
        assert!(plot.contains("<polyline"));
        let g3 = Grid::cylinder(0.0, 1.0, 1.0, 2, 2, 2).unwrap();
        let f3 = ScalarField::sample(&g3, &FnPoint(|x: f64, _: &[f64]| x)).unwrap();
        assert!(heatmap(&f3, "u").is_none());
    }
}
