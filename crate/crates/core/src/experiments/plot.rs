//! Static log-log plot of a rate experiment.

use std::fmt::Write as _;

use super::RateReport;

const W: f64 = 640.0;
const H: f64 = 480.0;
const PAD: f64 = 60.0;

/// SVG scatter of `(ln N, ln mean error)` with the fitted line. Output is a
/// pure function of the report.
pub fn rate_svg(report: &RateReport) -> String {
    let pts: Vec<(f64, f64)> = report
        .rows
        .iter()
        .filter(|r| r.mean > 0.0)
        .map(|r| ((r.n as f64).ln(), r.mean.ln()))
        .collect();
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="24" text-anchor="middle" font-family="sans-serif" font-size="14">{} ({} grid, {}): slope {:.3} (theory {:.3})</text>"#,
        W / 2.0,
        report.model,
        report.grid,
        report.reference,
        report.slope,
        report.theoretical_slope
    );
    if pts.is_empty() {
        svg.push_str("</svg>\n");
        return svg;
    }
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in &pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    let (x0, x1) = if x1 > x0 { (x0, x1) } else { (x0 - 1.0, x1 + 1.0) };
    let (y0, y1) = if y1 > y0 { (y0, y1) } else { (y0 - 1.0, y1 + 1.0) };
    let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);
    let _ = writeln!(
        svg,
        r#"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * PAD,
        H - 2.0 * PAD
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12">ln N</text>"#,
        W / 2.0,
        H - 20.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12" transform="rotate(-90 18 {})">ln mean error</text>"#,
        H / 2.0,
        H / 2.0
    );
    if report.slope.is_finite() {
        // line through the centroid with the fitted slope
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let f = |x: f64| my + report.slope * (x - mx);
        let _ = writeln!(
            svg,
            r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#c03030" stroke-width="1.5"/>"##,
            sx(x0),
            sy(f(x0)),
            sx(x1),
            sy(f(x1))
        );
    }
    for &(x, y) in &pts {
        let _ = writeln!(
            svg,
            r##"<circle cx="{:.2}" cy="{:.2}" r="4" fill="#3050c0"/>"##,
            sx(x),
            sy(y)
        );
    }
    svg.push_str("</svg>\n");
    svg
}
