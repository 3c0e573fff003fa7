use std::fmt::Write;

use super::AttributionReport;

const ROW: f64 = 18.0;
const LABEL_W: f64 = 150.0;
const BAR_W: f64 = 300.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Horizontal bar chart of each token's Shapley value for `class`: red bars
/// push towards the class, blue bars away from it.
pub fn render_svg(report: &AttributionReport, class: usize) -> String {
    let n = report.tokens.len();
    let scale = report
        .tokens
        .iter()
        .map(|t| t.phi[class].abs())
        .fold(0.0f64, f64::max)
        .max(1e-12);
    let height = ROW * (n as f64 + 2.0);
    let width = LABEL_W + BAR_W + 80.0;
    let mid = LABEL_W + BAR_W / 2.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="monospace" font-size="12">"#
    );
    let _ = writeln!(
        s,
        r#"<text x="4" y="{:.1}">{} class {} phi0 {:.4}</text>"#,
        ROW * 0.8,
        report.aspect,
        class,
        report.phi0[class]
    );
    let _ = writeln!(
        s,
        r##"<line x1="{mid}" y1="{ROW}" x2="{mid}" y2="{height}" stroke="#888"/>"##
    );
    for (i, t) in report.tokens.iter().enumerate() {
        let y = ROW * (i as f64 + 1.0);
        let v = t.phi[class];
        let len = v.abs() / scale * BAR_W / 2.0;
        let (x, color) = if v >= 0.0 { (mid, "#d62728") } else { (mid - len, "#1f77b4") };
        let _ = writeln!(
            s,
            r#"<text x="4" y="{:.1}">{}:{} {}</text>"#,
            y + ROW * 0.75,
            t.side.number(),
            t.pos,
            escape(&t.text)
        );
        let _ = writeln!(
            s,
            r#"<rect x="{x:.2}" y="{:.1}" width="{len:.2}" height="{:.1}" fill="{color}"/>"#,
            y + 2.0,
            ROW - 4.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}">{v:+.4}</text>"#,
            LABEL_W + BAR_W + 4.0,
            y + ROW * 0.75
        );
    }
    s.push_str("</svg>\n");
    s
}
