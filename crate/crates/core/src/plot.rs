//! SVG rendering of a DET curve on normal-deviate axes.

use std::fmt::Write as _;

use crate::probit::normal_deviate;
use crate::verification::DetPoint;

const SIZE: f64 = 480.0;
const MARGIN: f64 = 64.0;
const AXIS_MIN: f64 = 0.001;
const AXIS_MAX: f64 = 0.6;
const TICKS: [f64; 10] = [0.001, 0.002, 0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.4, 0.6];

fn deviate(p: f64) -> f64 {
    normal_deviate(p.clamp(AXIS_MIN, AXIS_MAX)).expect("clamped into (0, 1)")
}

fn label(p: f64) -> String {
    let pct = p * 100.0;
    if pct < 1.0 {
        format!("{pct:.1}")
    } else {
        format!("{pct:.0}")
    }
}

/// Renders the staircase (miss vs. false alarm, both in %), the equal-error
/// diagonal, and a marker at `eer`.
pub fn det_svg(points: &[DetPoint], eer: f64, title: &str) -> String {
    let lo = deviate(AXIS_MIN);
    let hi = deviate(AXIS_MAX);
    let span = SIZE - 2.0 * MARGIN;
    let x = |p: f64| MARGIN + (deviate(p) - lo) / (hi - lo) * span;
    let y = |p: f64| SIZE - MARGIN - (deviate(p) - lo) / (hi - lo) * span;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="13">{}</text>"#,
        SIZE / 2.0,
        escape(title)
    );

    for &t in &TICKS {
        let (tx, ty) = (x(t), y(t));
        let _ = writeln!(
            svg,
            r##"<line x1="{tx:.2}" y1="{MARGIN}" x2="{tx:.2}" y2="{:.2}" stroke="#ddd"/>"##,
            SIZE - MARGIN
        );
        let _ = writeln!(
            svg,
            r##"<line x1="{MARGIN}" y1="{ty:.2}" x2="{:.2}" y2="{ty:.2}" stroke="#ddd"/>"##,
            SIZE - MARGIN
        );
        let _ = writeln!(
            svg,
            r#"<text x="{tx:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            SIZE - MARGIN + 14.0,
            label(t)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            MARGIN - 6.0,
            ty + 4.0,
            label(t)
        );
    }
    let _ = writeln!(
        svg,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{span}" height="{span}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">False Alarm probability (%)</text>"#,
        SIZE / 2.0,
        SIZE - 20.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{0}" text-anchor="middle" transform="rotate(-90 18 {0})">Miss probability (%)</text>"#,
        SIZE / 2.0
    );

    // equal error line
    let _ = writeln!(
        svg,
        r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#888" stroke-dasharray="4 3"/>"##,
        x(AXIS_MIN),
        y(AXIS_MIN),
        x(AXIS_MAX),
        y(AXIS_MAX)
    );

    let mut path = String::new();
    for p in points {
        let _ = write!(path, "{:.2},{:.2} ", x(p.p_fa), y(p.p_miss));
    }
    let _ = writeln!(
        svg,
        r##"<polyline points="{}" fill="none" stroke="#1f4fbf" stroke-width="1.5" stroke-dasharray="2 2"/>"##,
        path.trim_end()
    );
    if eer > 0.0 {
        let _ = writeln!(
            svg,
            r##"<circle cx="{:.2}" cy="{:.2}" r="3.5" fill="#c0392b"/>"##,
            x(eer),
            y(eer)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}">EER {:.2}%</text>"#,
        MARGIN + 8.0,
        MARGIN + 16.0,
        eer * 100.0
    );
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_well_formed_document() {
        let points = [
            DetPoint { threshold: f64::INFINITY, p_fa: 1.0, p_miss: 0.0 },
            DetPoint { threshold: 1.0, p_fa: 0.1, p_miss: 0.05 },
            DetPoint { threshold: f64::NEG_INFINITY, p_fa: 0.0, p_miss: 1.0 },
        ];
        let svg = det_svg(&points, 0.07, "a <b> & c");
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("a &lt;b&gt; &amp; c"));
        assert!(svg.contains("<polyline"));
        assert!(!svg.contains("NaN") && !svg.contains("inf"));
    }
}
