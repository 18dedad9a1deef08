//! Log-log convergence plots as plain SVG polylines.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const PAD: f64 = 60.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Points with a non-positive coordinate are dropped (no logarithm).
pub fn loglog(title: &str, x_label: &str, y_label: &str, xs: &[f64], ys: &[f64]) -> String {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0 && x.is_finite() && y.is_finite())
        .map(|(x, y)| (x.log10(), y.log10()))
        .collect();
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="24" text-anchor="middle" font-family="sans-serif" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let (x0, x1, y0, y1) = (PAD, WIDTH - PAD / 2.0, HEIGHT - PAD, PAD);
    let _ = writeln!(
        out,
        r#"<polyline points="{x0},{y1} {x0},{y0} {x1},{y0}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="13">{}</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 15.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="18" y="{}" text-anchor="middle" font-family="sans-serif" font-size="13" transform="rotate(-90 18 {})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(y_label)
    );
    if !pts.is_empty() {
        let (mut lx0, mut lx1) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut ly0, mut ly1) = (f64::INFINITY, f64::NEG_INFINITY);
        for &(x, y) in &pts {
            lx0 = lx0.min(x);
            lx1 = lx1.max(x);
            ly0 = ly0.min(y);
            ly1 = ly1.max(y);
        }
        if lx1 - lx0 < 1e-9 {
            lx0 -= 0.5;
            lx1 += 0.5;
        }
        if ly1 - ly0 < 1e-3 {
            ly0 -= 0.05;
            ly1 += 0.05;
        }
        let px = |x: f64| x0 + (x - lx0) / (lx1 - lx0) * (x1 - x0);
        let py = |y: f64| y0 - (y - ly0) / (ly1 - ly0) * (y0 - y1);
        for (v, anchor) in [(lx0, "start"), (lx1, "end")] {
            let _ = writeln!(
                out,
                r#"<text x="{:.2}" y="{}" text-anchor="{anchor}" font-family="sans-serif" font-size="11">1e{v:.2}</text>"#,
                px(v),
                y0 + 16.0
            );
        }
        for v in [ly0, ly1] {
            let _ = writeln!(
                out,
                r#"<text x="{}" y="{:.2}" text-anchor="end" font-family="sans-serif" font-size="11">1e{v:.3}</text>"#,
                x0 - 4.0,
                py(v) + 4.0
            );
        }
        let line: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        let _ = writeln!(
            out,
            r##"<polyline points="{}" fill="none" stroke="#1f5fa8" stroke-width="2"/>"##,
            line.join(" ")
        );
        for &(x, y) in &pts {
            let _ = writeln!(
                out,
                r##"<circle cx="{:.2}" cy="{:.2}" r="3" fill="#1f5fa8"/>"##,
                px(x),
                py(y)
            );
        }
    }
    out.push_str("</svg>\n");
    out
}
