//! Minimal self-contained SVG plots.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const PAD: f64 = 48.0;

pub struct Series {
    pub label: String,
    pub color: &'static str,
    pub points: Vec<(f64, f64)>,
    /// Drawn as dots rather than a polyline.
    pub scatter: bool,
}

pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

fn bounds(series: &[Series]) -> (f64, f64, f64, f64) {
    let mut b = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in series.iter().flat_map(|s| &s.points) {
        if x.is_finite() && y.is_finite() {
            b = (b.0.min(x), b.1.max(x), b.2.min(y), b.3.max(y));
        }
    }
    if !b.0.is_finite() {
        return (-1.0, 1.0, -1.0, 1.0);
    }
    let pad = |lo: f64, hi: f64| {
        let span = (hi - lo).max(1e-12 * hi.abs().max(1.0));
        (lo - 0.05 * span, hi + 0.05 * span)
    };
    let (x0, x1) = pad(b.0, b.1);
    let (y0, y1) = pad(b.2, b.3);
    (x0, x1, y0, y1)
}

impl Plot {
    pub fn render(&self) -> String {
        let (x0, x1, y0, y1) = bounds(&self.series);
        let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * PAD);
        let sy = |y: f64| HEIGHT - PAD - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * PAD);

        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            out,
            r#"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            WIDTH - 2.0 * PAD,
            HEIGHT - 2.0 * PAD
        );
        if x0 < 0.0 && x1 > 0.0 {
            let _ = writeln!(
                out,
                r##"<line x1="{0:.2}" y1="{PAD}" x2="{0:.2}" y2="{1}" stroke="#bbb"/>"##,
                sx(0.0),
                HEIGHT - PAD
            );
        }
        if y0 < 0.0 && y1 > 0.0 {
            let _ = writeln!(
                out,
                r##"<line x1="{PAD}" y1="{0:.2}" x2="{1}" y2="{0:.2}" stroke="#bbb"/>"##,
                sy(0.0),
                WIDTH - PAD
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
            WIDTH / 2.0,
            escape(&self.title)
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            WIDTH / 2.0,
            HEIGHT - 12.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            out,
            r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
            HEIGHT / 2.0,
            HEIGHT / 2.0,
            escape(&self.y_label)
        );
        for (label, x, anchor) in [(x0, PAD, "start"), (x1, WIDTH - PAD, "end")] {
            let _ = writeln!(
                out,
                r#"<text x="{x}" y="{}" text-anchor="{anchor}">{label:.3}</text>"#,
                HEIGHT - PAD + 14.0
            );
        }
        for (label, y) in [(y0, HEIGHT - PAD), (y1, PAD + 10.0)] {
            let _ = writeln!(out, r#"<text x="{}" y="{y}" text-anchor="end">{label:.3}</text>"#, PAD - 4.0);
        }

        for (k, s) in self.series.iter().enumerate() {
            let pts: Vec<(f64, f64)> = s
                .points
                .iter()
                .filter(|(x, y)| x.is_finite() && y.is_finite())
                .map(|&(x, y)| (sx(x), sy(y)))
                .collect();
            if s.scatter {
                for (x, y) in pts {
                    let _ = writeln!(out, r#"<circle cx="{x:.2}" cy="{y:.2}" r="1.5" fill="{}"/>"#, s.color);
                }
            } else {
                let path: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
                let _ = writeln!(
                    out,
                    r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
                    path.join(" "),
                    s.color
                );
            }
            let ly = PAD + 16.0 + 16.0 * k as f64;
            let _ = writeln!(
                out,
                r#"<text x="{}" y="{ly}" fill="{}">{}</text>"#,
                PAD + 8.0,
                s.color,
                escape(&s.label)
            );
        }
        out.push_str("</svg>\n");
        out
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
