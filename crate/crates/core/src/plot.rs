//! SVG chart of default rate against acceptance rate, one line per
//! technique with ±1 standard-error whiskers. Left panel: A1 validation,
//! right panel: A2.

use std::fmt::Write as _;

use crate::metrics::CurvePoint;
use crate::pipeline::ExperimentReport;

const PALETTE: [&str; 7] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf",
];
const PANEL_W: f64 = 420.0;
const PANEL_H: f64 = 320.0;
const MARGIN: f64 = 55.0;

struct Panel<'a> {
    title: &'a str,
    series: Vec<(&'a str, &'a [CurvePoint])>,
}

fn extent(panels: &[Panel<'_>]) -> (f64, f64, f64) {
    let points = panels.iter().flat_map(|p| p.series.iter().flat_map(|s| s.1.iter()));
    let (mut lo, mut hi, mut top) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64);
    for p in points {
        lo = lo.min(p.acceptance_rate);
        hi = hi.max(p.acceptance_rate);
        top = top.max(p.default_rate + p.std_error);
    }
    if !lo.is_finite() || hi <= lo {
        lo = 0.0;
        hi = 1.0;
    }
    (lo, hi, if top > 0.0 { top * 1.1 } else { 1.0 })
}

fn draw_panel(s: &mut String, panel: &Panel<'_>, x0: f64, (lo, hi, top): (f64, f64, f64)) {
    let px = |a: f64| x0 + MARGIN + (a - lo) / (hi - lo) * (PANEL_W - MARGIN - 10.0);
    let py = |r: f64| 30.0 + (1.0 - r / top) * (PANEL_H - 30.0 - MARGIN);
    let (left, right, bottom) = (px(lo), px(hi), py(0.0));
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="20" font-size="13" text-anchor="middle">{}</text>"#,
        (left + right) / 2.0,
        panel.title
    );
    let _ = writeln!(
        s,
        r#"<path d="M{left:.1},{:.1} L{left:.1},{bottom:.1} L{right:.1},{bottom:.1}" stroke="black" fill="none"/>"#,
        py(top)
    );
    for i in 0..=4 {
        let r = top * f64::from(i) / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="end">{:.3}</text>"#,
            left - 4.0,
            py(r) + 3.0,
            r
        );
        let a = lo + (hi - lo) * f64::from(i) / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="middle">{:.2}</text>"#,
            px(a),
            bottom + 14.0,
            a
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="middle">acceptance rate</text>"#,
        (left + right) / 2.0,
        bottom + 32.0
    );
    for (i, (tag, curve)) in panel.series.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        let d: Vec<String> = curve
            .iter()
            .enumerate()
            .map(|(j, p)| {
                format!(
                    "{}{:.1},{:.1}",
                    if j == 0 { "M" } else { "L" },
                    px(p.acceptance_rate),
                    py(p.default_rate)
                )
            })
            .collect();
        let _ = writeln!(
            s,
            r#"<path class="curve" data-technique="{tag}" d="{}" stroke="{colour}" fill="none" stroke-width="1.5"/>"#,
            d.join(" ")
        );
        for p in curve.iter() {
            let x = px(p.acceptance_rate);
            let (ya, yb) = (
                py((p.default_rate - p.std_error).max(0.0)),
                py(p.default_rate + p.std_error),
            );
            let _ = writeln!(
                s,
                r#"<path class="whisker" data-technique="{tag}" d="M{x:.1},{ya:.1} L{x:.1},{yb:.1} M{:.1},{ya:.1} L{:.1},{ya:.1} M{:.1},{yb:.1} L{:.1},{yb:.1}" stroke="{colour}"/>"#,
                x - 3.0,
                x + 3.0,
                x - 3.0,
                x + 3.0
            );
        }
    }
}

pub fn render_svg(report: &ExperimentReport) -> String {
    let panels = [
        Panel {
            title: "A1 validation",
            series: report
                .results
                .iter()
                .map(|r| (r.fit.technique.tag(), r.metrics.curve.as_slice()))
                .collect(),
        },
        Panel {
            title: "A2",
            series: report
                .results
                .iter()
                .map(|r| (r.fit.technique.tag(), r.a2_curve.as_slice()))
                .collect(),
        },
    ];
    let range = extent(&panels);
    let legend_h = 18.0 * report.results.len() as f64 + 10.0;
    let width = 2.0 * PANEL_W;
    let height = PANEL_H + legend_h;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="14" y="{:.1}" font-size="11" transform="rotate(-90 14 {:.1})" text-anchor="middle">default rate among accepted</text>"#,
        PANEL_H / 2.0,
        PANEL_H / 2.0
    );
    for (i, panel) in panels.iter().enumerate() {
        draw_panel(&mut s, panel, i as f64 * PANEL_W, range);
    }
    let _ = writeln!(s, r#"<g class="legend">"#);
    for (i, r) in report.results.iter().enumerate() {
        let y = PANEL_H + 8.0 + 18.0 * i as f64;
        let colour = PALETTE[i % PALETTE.len()];
        let marker = if r.fit.technique == report.selected {
            " (selected)"
        } else {
            ""
        };
        let _ = writeln!(
            s,
            r#"<path d="M{m:.1},{y:.1} L{:.1},{y:.1}" stroke="{colour}" stroke-width="2"/><text x="{:.1}" y="{:.1}" font-size="11">{}{marker}</text>"#,
            MARGIN + 24.0,
            MARGIN + 30.0,
            y + 4.0,
            r.fit.technique,
            m = MARGIN,
        );
    }
    let _ = writeln!(s, "</g>");
    s.push_str("</svg>\n");
    s
}
