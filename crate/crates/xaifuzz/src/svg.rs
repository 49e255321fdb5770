//! SVG output: digit outlines as cubic paths and failure-curve charts.

use std::fmt::Write as _;

use xaifuzz_core::digit::{DigitSemantic, SIDE};

/// Path data with one `M ... C ... Z` subpath per outline.
pub fn path_data(sem: &DigitSemantic) -> String {
    let mut d = String::new();
    for path in sem.paths() {
        let p = path.points();
        write!(d, "M {} {}", p[0].x, p[0].y).unwrap();
        for k in 0..path.segment_count() {
            let [_, a, b, e] = path.segment(k);
            write!(d, " C {} {} {} {} {} {}", a.x, a.y, b.x, b.y, e.x, e.y).unwrap();
        }
        d.push_str(" Z ");
    }
    d.trim_end().to_string()
}

/// Filled glyph on the 28x28 canvas. Holes use the even-odd rule.
pub fn digit_svg(sem: &DigitSemantic) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"-0.5 -0.5 {SIDE} {SIDE}\" width=\"280\" height=\"280\">\n\
         <rect x=\"-0.5\" y=\"-0.5\" width=\"{SIDE}\" height=\"{SIDE}\" fill=\"black\"/>\n\
         <path d=\"{}\" fill=\"white\" fill-rule=\"evenodd\"/>\n</svg>\n",
        path_data(sem)
    )
}

pub struct Series<'a> {
    pub label: &'a str,
    pub color: &'a str,
    /// `values[i]` is plotted at iteration `i + 1`.
    pub values: &'a [f64],
}

/// Line chart of cumulative failure rate against iteration.
pub fn curves_svg(series: &[Series]) -> String {
    let (w, h, m) = (640.0, 400.0, 50.0);
    let n = series.iter().map(|s| s.values.len()).max().unwrap_or(1).max(2);
    let x = |i: usize| m + (w - 2.0 * m) * i as f64 / (n - 1) as f64;
    let y = |v: f64| h - m - (h - 2.0 * m) * v;
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n"
    );
    writeln!(
        s,
        "<path d=\"M {m} {} L {m} {} L {} {}\" stroke=\"black\" fill=\"none\"/>",
        m,
        h - m,
        w - m,
        h - m
    )
    .unwrap();
    for t in [0.0, 0.25, 0.5, 0.75, 1.0] {
        writeln!(s, "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{t}</text>", m - 6.0, y(t) + 4.0).unwrap();
    }
    writeln!(s, "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">iteration</text>", w / 2.0, h - 12.0).unwrap();
    writeln!(s, "<text x=\"{m}\" y=\"{}\" text-anchor=\"end\">1</text>", h - m + 16.0).unwrap();
    writeln!(s, "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{n}</text>", w - m, h - m + 16.0).unwrap();
    for (k, ser) in series.iter().enumerate() {
        let pts: Vec<String> = ser
            .values
            .iter()
            .enumerate()
            .map(|(i, &v)| format!("{:.2},{:.2}", x(i), y(v)))
            .collect();
        writeln!(
            s,
            "<polyline points=\"{}\" stroke=\"{}\" stroke-width=\"2\" fill=\"none\"/>",
            pts.join(" "),
            ser.color
        )
        .unwrap();
        writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" fill=\"{}\">{}</text>",
            m + 10.0,
            m + 16.0 * k as f64,
            ser.color,
            ser.label
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use xaifuzz_core::digit::BezierPath;
    use xaifuzz_core::geom::Vec2;

    #[test]
    fn cubic_segments_close_each_outline() {
        let pts = (0..6).map(|i| Vec2::new(i as f64, 2.0 * i as f64)).collect();
        let sem = DigitSemantic::new(vec![BezierPath::new(pts).unwrap()]);
        assert_eq!(path_data(&sem), "M 0 0 C 1 2 2 4 3 6 C 4 8 5 10 0 0 Z");
        assert!(digit_svg(&sem).contains("fill-rule=\"evenodd\""));
    }

    #[test]
    fn one_polyline_per_series() {
        let a = [0.0, 0.5, 1.0];
        let svg = curves_svg(&[
            Series { label: "guided", color: "red", values: &a },
            Series { label: "baseline", color: "blue", values: &a[..2] },
        ]);
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("50.00,350.00 320.00,200.00 590.00,50.00"));
    }
}
