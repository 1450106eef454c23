//! Deterministic SVG learning curves: one polyline per agent over life-cycle
//! indices, with a shaded band of one standard error around each mean.

use std::fmt::Write as _;

use crate::error::{Error, Result};

use super::metrics::{CurvePoint, MetricsTable};

pub struct CurveSeries {
    pub label: String,
    pub points: Vec<CurvePoint>,
}

impl From<&MetricsTable> for CurveSeries {
    fn from(t: &MetricsTable) -> Self {
        CurveSeries { label: t.agent.clone(), points: t.curve.clone() }
    }
}

const WIDTH: f64 = 820.0;
const HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 64.0;
const MARGIN_RIGHT: f64 = 160.0;
const MARGIN_TOP: f64 = 24.0;
const MARGIN_BOTTOM: f64 = 48.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

fn fmt(v: f64) -> String {
    format!("{v:.2}")
}

/// Renders the series to a standalone SVG document. Deterministic for
/// identical inputs; errors on empty input.
pub fn render_learning_curves(series: &[CurveSeries]) -> Result<String> {
    if series.is_empty() || series.iter().all(|s| s.points.is_empty()) {
        return Err(Error::validation("nothing to plot: no curve points"));
    }
    let x_max = series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.life_cycle))
        .max()
        .unwrap_or(0) as f64;
    let x_min = series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.life_cycle))
        .min()
        .unwrap_or(0) as f64;
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for s in series {
        for p in &s.points {
            y_min = y_min.min(p.mean - p.std_error);
            y_max = y_max.max(p.mean + p.std_error);
        }
    }
    y_min = y_min.min(0.0);
    if (y_max - y_min).abs() < 1e-9 {
        y_max = y_min + 1.0;
    }
    let x_span = if x_max > x_min { x_max - x_min } else { 1.0 };
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let x_px = |x: f64| MARGIN_LEFT + (x - x_min) / x_span * plot_w;
    let y_px = |y: f64| MARGIN_TOP + (y_max - y) / (y_max - y_min) * plot_h;

    let mut svg = String::new();
    writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">"
    )
    .expect("string write");
    writeln!(svg, "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>")
        .expect("string write");

    // Axes.
    writeln!(
        svg,
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>",
        fmt(MARGIN_LEFT),
        fmt(MARGIN_TOP + plot_h),
        fmt(MARGIN_LEFT + plot_w),
        fmt(MARGIN_TOP + plot_h)
    )
    .expect("string write");
    writeln!(
        svg,
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>",
        fmt(MARGIN_LEFT),
        fmt(MARGIN_TOP),
        fmt(MARGIN_LEFT),
        fmt(MARGIN_TOP + plot_h)
    )
    .expect("string write");

    // Ticks: five per axis.
    for i in 0..=4 {
        let fx = x_min + x_span * i as f64 / 4.0;
        let fy = y_min + (y_max - y_min) * i as f64 / 4.0;
        writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"middle\">{}</text>",
            fmt(x_px(fx)),
            fmt(MARGIN_TOP + plot_h + 16.0),
            fmt(fx)
        )
        .expect("string write");
        writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"end\">{}</text>",
            fmt(MARGIN_LEFT - 6.0),
            fmt(y_px(fy) + 4.0),
            fmt(fy)
        )
        .expect("string write");
    }
    writeln!(
        svg,
        "<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">life-cycle</text>",
        fmt(MARGIN_LEFT + plot_w / 2.0),
        fmt(HEIGHT - 10.0)
    )
    .expect("string write");
    writeln!(
        svg,
        "<text x=\"14\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 14 {})\">average life-cycle reward</text>",
        fmt(MARGIN_TOP + plot_h / 2.0),
        fmt(MARGIN_TOP + plot_h / 2.0)
    )
    .expect("string write");

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        if s.points.is_empty() {
            continue;
        }
        // Error band: upper edge forward, lower edge backward.
        let mut band = String::new();
        for p in &s.points {
            write!(
                band,
                "{},{} ",
                fmt(x_px(p.life_cycle as f64)),
                fmt(y_px(p.mean + p.std_error))
            )
            .expect("string write");
        }
        for p in s.points.iter().rev() {
            write!(
                band,
                "{},{} ",
                fmt(x_px(p.life_cycle as f64)),
                fmt(y_px(p.mean - p.std_error))
            )
            .expect("string write");
        }
        writeln!(
            svg,
            "<polygon points=\"{}\" fill=\"{color}\" fill-opacity=\"0.15\" stroke=\"none\"/>",
            band.trim_end()
        )
        .expect("string write");

        let line: Vec<String> = s
            .points
            .iter()
            .map(|p| format!("{},{}", fmt(x_px(p.life_cycle as f64)), fmt(y_px(p.mean))))
            .collect();
        writeln!(
            svg,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>",
            line.join(" ")
        )
        .expect("string write");

        // Legend entry.
        let ly = MARGIN_TOP + 14.0 + 18.0 * i as f64;
        writeln!(
            svg,
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{color}\" stroke-width=\"2\"/>",
            fmt(WIDTH - MARGIN_RIGHT + 10.0),
            fmt(ly),
            fmt(WIDTH - MARGIN_RIGHT + 34.0),
            fmt(ly)
        )
        .expect("string write");
        writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-size=\"12\">{}</text>",
            fmt(WIDTH - MARGIN_RIGHT + 40.0),
            fmt(ly + 4.0),
            s.label
        )
        .expect("string write");
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}
