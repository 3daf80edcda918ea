use std::collections::BTreeSet;
use std::fmt::Write as _;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 40.0;
const PLOT_RIGHT: f64 = 560.0;

/// Fixed categorical palette; cluster ids beyond its length wrap around.
pub const PALETTE: [&str; 12] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf", "#393b79", "#ad494a",
];

pub fn palette_color(cluster: usize) -> &'static str {
    PALETTE[cluster % PALETTE.len()]
}

/// Renders a scatter plot as SVG text. One `<circle>` per point, one legend
/// row (`<rect>` swatch plus label) per distinct cluster id.
pub fn render_scatter_svg(points: &[[f64; 2]], labels: &[usize]) -> String {
    let (mut min_x, mut max_x, mut min_y, mut max_y) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    if let Some(first) = points.first() {
        (min_x, max_x, min_y, max_y) = (first[0], first[0], first[1], first[1]);
        for p in points {
            min_x = min_x.min(p[0]);
            max_x = max_x.max(p[0]);
            min_y = min_y.min(p[1]);
            max_y = max_y.max(p[1]);
        }
    }
    let span_x = if max_x > min_x { max_x - min_x } else { 1.0 };
    let span_y = if max_y > min_y { max_y - min_y } else { 1.0 };
    let inner_w = PLOT_RIGHT - 2.0 * MARGIN;
    let inner_h = HEIGHT - 2.0 * MARGIN;
    let sx = |x: f64| MARGIN + (x - min_x) / span_x * inner_w;
    let sy = |y: f64| HEIGHT - MARGIN - (y - min_y) / span_y * inner_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<g id="axes" stroke="black" stroke-width="1"><line x1="{MARGIN}" y1="{y0}" x2="{PLOT_RIGHT}" y2="{y0}"/><line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{y0}"/></g>"#,
        y0 = HEIGHT - MARGIN
    );
    let _ = writeln!(
        svg,
        r#"<text x="{x}" y="{y}" font-family="sans-serif" font-size="12" text-anchor="middle">PC1</text>"#,
        x = (MARGIN + PLOT_RIGHT) / 2.0,
        y = HEIGHT - 10.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="14" y="{y}" font-family="sans-serif" font-size="12" text-anchor="middle" transform="rotate(-90 14 {y})">PC2</text>"#,
        y = HEIGHT / 2.0
    );
    svg.push_str("<g id=\"points\">\n");
    for (p, &l) in points.iter().zip(labels) {
        let _ = writeln!(
            svg,
            r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="{}" fill-opacity="0.8" data-cluster="{}"/>"#,
            sx(p[0]),
            sy(p[1]),
            palette_color(l),
            l
        );
    }
    svg.push_str("</g>\n<g id=\"legend\" font-family=\"sans-serif\" font-size=\"12\">\n");
    let clusters: BTreeSet<usize> = labels.iter().copied().collect();
    for (row, c) in clusters.iter().enumerate() {
        let y = MARGIN + row as f64 * 18.0;
        let _ = writeln!(
            svg,
            r#"<g class="legend-entry"><rect x="{x}" y="{y}" width="12" height="12" fill="{color}"/><text x="{tx}" y="{ty}">cluster {c}</text></g>"#,
            x = PLOT_RIGHT + 20.0,
            color = palette_color(*c),
            tx = PLOT_RIGHT + 38.0,
            ty = y + 10.0
        );
    }
    svg.push_str("</g>\n</svg>\n");
    svg
}
