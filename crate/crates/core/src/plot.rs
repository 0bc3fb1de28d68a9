//! DET plots as standalone SVG, drawn directly (no plotting dependency).
//! Both axes are logarithmic; rates below the axis floor are clamped onto
//! it so perfect operating points stay visible at the edge.

use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_B: f64 = 55.0;
const AXIS_MIN: f64 = 1e-3;

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

fn x_of(far: f64) -> f64 {
    let clamped = far.clamp(AXIS_MIN, 1.0);
    let frac = (clamped / AXIS_MIN).log10() / (1.0 / AXIS_MIN).log10();
    MARGIN_L + frac * (WIDTH - MARGIN_L - MARGIN_R)
}

fn y_of(frr: f64) -> f64 {
    let clamped = frr.clamp(AXIS_MIN, 1.0);
    let frac = (clamped / AXIS_MIN).log10() / (1.0 / AXIS_MIN).log10();
    HEIGHT - MARGIN_B - frac * (HEIGHT - MARGIN_T - MARGIN_B)
}

/// Renders one or more DET curves. Each curve is a list of (FAR, FRR)
/// points with a legend label.
pub fn det_svg(curves: &[(String, Vec<(f64, f64)>)]) -> String {
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"##
    );
    let _ = writeln!(
        svg,
        r##"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"##
    );

    // Decade gridlines and tick labels.
    for exp in -3..=0i32 {
        let v = 10f64.powi(exp);
        let label = match exp {
            -3 => "0.1%",
            -2 => "1%",
            -1 => "10%",
            _ => "100%",
        };
        let x = x_of(v);
        let y = y_of(v);
        let _ = writeln!(
            svg,
            r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#dddddd"/>"##,
            MARGIN_T,
            HEIGHT - MARGIN_B
        );
        let _ = writeln!(
            svg,
            r##"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd"/>"##,
            MARGIN_L,
            WIDTH - MARGIN_R
        );
        let _ = writeln!(
            svg,
            r##"<text x="{x:.2}" y="{:.2}" font-size="12" text-anchor="middle" fill="#333333">{label}</text>"##,
            HEIGHT - MARGIN_B + 18.0
        );
        let _ = writeln!(
            svg,
            r##"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="end" fill="#333333">{label}</text>"##,
            MARGIN_L - 6.0,
            y + 4.0
        );
    }

    // Frame and axis titles.
    let _ = writeln!(
        svg,
        r##"<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{:.2}" height="{:.2}" fill="none" stroke="#333333"/>"##,
        WIDTH - MARGIN_L - MARGIN_R,
        HEIGHT - MARGIN_T - MARGIN_B
    );
    let _ = writeln!(
        svg,
        r##"<text x="{:.2}" y="{:.2}" font-size="14" text-anchor="middle" fill="#111111">False acceptance rate</text>"##,
        (MARGIN_L + WIDTH - MARGIN_R) / 2.0,
        HEIGHT - 12.0
    );
    let _ = writeln!(
        svg,
        r##"<text x="16" y="{:.2}" font-size="14" text-anchor="middle" fill="#111111" transform="rotate(-90 16 {:.2})">False rejection rate</text>"##,
        (MARGIN_T + HEIGHT - MARGIN_B) / 2.0,
        (MARGIN_T + HEIGHT - MARGIN_B) / 2.0
    );

    // Chance diagonal (FAR == FRR).
    let _ = writeln!(
        svg,
        r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#bbbbbb" stroke-dasharray="4 4"/>"##,
        x_of(AXIS_MIN),
        y_of(AXIS_MIN),
        x_of(1.0),
        y_of(1.0)
    );

    for (i, (label, points)) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut path = String::new();
        for (k, (far, frr)) in points.iter().enumerate() {
            let cmd = if k == 0 { 'M' } else { 'L' };
            let _ = write!(path, "{cmd}{:.2} {:.2} ", x_of(*far), y_of(*frr));
        }
        let _ = writeln!(
            svg,
            r##"<path d="{}" fill="none" stroke="{color}" stroke-width="1.8"/>"##,
            path.trim_end()
        );
        let ly = MARGIN_T + 16.0 + i as f64 * 18.0;
        let _ = writeln!(
            svg,
            r##"<line x1="{:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="1.8"/>"##,
            WIDTH - MARGIN_R - 150.0,
            WIDTH - MARGIN_R - 120.0
        );
        let _ = writeln!(
            svg,
            r##"<text x="{:.2}" y="{:.2}" font-size="12" fill="#111111">{label}</text>"##,
            WIDTH - MARGIN_R - 112.0,
            ly + 4.0
        );
    }
    svg.push_str("</svg>\n");
    svg
}
