//! Minimal standalone SVG output: a polyline with axes, no dependencies.

use std::io::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 48.0;

/// Render the planar curve as an SVG document. World coordinates are meters;
/// the y-axis points up (flipped into screen space here).
pub fn write_polyline_svg<W: Write>(
    out: &mut W,
    points: &[(f64, f64)],
    title: &str,
) -> std::io::Result<()> {
    let (mut x_lo, mut x_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y_lo, mut y_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in points {
        x_lo = x_lo.min(x);
        x_hi = x_hi.max(x);
        y_lo = y_lo.min(y);
        y_hi = y_hi.max(y);
    }
    // Include the origin so the axes are visible, and avoid a zero-size box.
    x_lo = x_lo.min(0.0);
    y_lo = y_lo.min(0.0);
    x_hi = x_hi.max(0.0);
    y_hi = y_hi.max(0.0);
    let span = (x_hi - x_lo).max(y_hi - y_lo).max(1e-9);
    let pad = 0.05 * span;
    x_lo -= pad;
    y_lo -= pad;
    x_hi += pad;
    y_hi += pad;

    let scale =
        ((WIDTH - 2.0 * MARGIN) / (x_hi - x_lo)).min((HEIGHT - 2.0 * MARGIN) / (y_hi - y_lo));
    let map = |x: f64, y: f64| {
        (
            MARGIN + (x - x_lo) * scale,
            HEIGHT - MARGIN - (y - y_lo) * scale,
        )
    };

    writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">"
    )?;
    writeln!(out, "  <title>{title}</title>")?;
    writeln!(
        out,
        "  <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\" stroke=\"#999\"/>"
    )?;

    // Axes through the world origin.
    let (ox, oy) = map(0.0, 0.0);
    writeln!(
        out,
        "  <line x1=\"{MARGIN}\" y1=\"{oy:.2}\" x2=\"{:.2}\" y2=\"{oy:.2}\" stroke=\"#bbb\"/>",
        WIDTH - MARGIN
    )?;
    writeln!(
        out,
        "  <line x1=\"{ox:.2}\" y1=\"{MARGIN}\" x2=\"{ox:.2}\" y2=\"{:.2}\" stroke=\"#bbb\"/>",
        HEIGHT - MARGIN
    )?;

    let path: Vec<String> = points
        .iter()
        .map(|&(x, y)| {
            let (px, py) = map(x, y);
            format!("{px:.2},{py:.2}")
        })
        .collect();
    writeln!(
        out,
        "  <polyline points=\"{}\" fill=\"none\" stroke=\"#1f6fb2\" stroke-width=\"2\"/>",
        path.join(" ")
    )?;

    writeln!(
        out,
        "  <text x=\"{MARGIN}\" y=\"{:.2}\" font-size=\"12\" fill=\"#333\">x: [{x_lo:.4}, {x_hi:.4}] m</text>",
        HEIGHT - 14.0
    )?;
    writeln!(
        out,
        "  <text x=\"{MARGIN}\" y=\"24\" font-size=\"12\" fill=\"#333\">y: [{y_lo:.4}, {y_hi:.4}] m</text>"
    )?;
    writeln!(out, "</svg>")?;
    Ok(())
}
