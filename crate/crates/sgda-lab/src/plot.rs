//! Minimal SVG charts for sweep results.
//!
//! Each chart is a pure function of the rows it is given: rendering the same
//! CSV twice yields byte-identical SVG. Numeric axes switch to log scale when
//! every level is positive and the spread exceeds one decade; the topology
//! axis is categorical. Means are drawn as a solid polyline with one-sigma
//! error bars, the matching bound as a dashed overlay.

use crate::error::{Error, Result};
use crate::report::OutputRow;
use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 36.0;
const MARGIN_B: f64 = 56.0;

#[derive(Debug, Clone, Copy)]
enum Scale {
    Linear { lo: f64, hi: f64 },
    Log { lo: f64, hi: f64 },
}

impl Scale {
    fn project(&self, v: f64, px_lo: f64, px_hi: f64) -> f64 {
        let frac = match *self {
            Scale::Linear { lo, hi } => {
                if hi > lo {
                    (v - lo) / (hi - lo)
                } else {
                    0.5
                }
            }
            Scale::Log { lo, hi } => {
                let (l, h) = (lo.ln(), hi.ln());
                if h > l {
                    (v.ln() - l) / (h - l)
                } else {
                    0.5
                }
            }
        };
        px_lo + frac.clamp(0.0, 1.0) * (px_hi - px_lo)
    }

    fn ticks(&self) -> Vec<f64> {
        match *self {
            Scale::Linear { lo, hi } => (0..=4).map(|i| lo + (hi - lo) * i as f64 / 4.0).collect(),
            Scale::Log { lo, hi } => {
                let (l, h) = (lo.ln(), hi.ln());
                (0..=4).map(|i| (l + (h - l) * i as f64 / 4.0).exp()).collect()
            }
        }
    }
}

fn pick_scale(values: &[f64]) -> Scale {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo > 0.0 && hi / lo >= 10.0 {
        Scale::Log { lo, hi }
    } else if (hi - lo).abs() < f64::EPSILON {
        let pad = if lo.abs() > 0.0 { lo.abs() * 0.1 } else { 1.0 };
        Scale::Linear { lo: lo - pad, hi: hi + pad }
    } else {
        Scale::Linear { lo, hi }
    }
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let mag = v.abs();
    if (1e-3..1e4).contains(&mag) {
        let s = format!("{v:.4}");
        let s = s.trim_end_matches('0').trim_end_matches('.').to_string();
        if s.is_empty() { "0".to_string() } else { s }
    } else {
        format!("{v:.1e}")
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

struct Point {
    label: String,
    x: f64,
    mean: f64,
    std: f64,
    bound: Option<f64>,
}

/// Renders one measure's mean, spread, and bound against the sweep axis.
pub fn render_measure_plot(rows: &[OutputRow], axis_label: &str, measure: &str) -> Result<String> {
    let selected: Vec<&OutputRow> = rows
        .iter()
        .filter(|r| r.measure == measure && r.seeds > 0)
        .collect();
    if selected.is_empty() {
        return Err(Error::invalid("plot", format!("no successful rows for measure {measure}")));
    }

    let numeric: Option<Vec<f64>> = selected
        .iter()
        .map(|r| r.value.parse::<f64>().ok())
        .collect();
    let mut points: Vec<Point> = Vec::with_capacity(selected.len());
    let x_scale = match numeric {
        Some(values) => {
            for (r, &v) in selected.iter().zip(values.iter()) {
                points.push(Point {
                    label: r.value.clone(),
                    x: v,
                    mean: r.mean,
                    std: r.std,
                    bound: r.bound,
                });
            }
            points.sort_by(|a, b| a.x.total_cmp(&b.x));
            Some(pick_scale(&values))
        }
        None => {
            for (i, r) in selected.iter().enumerate() {
                points.push(Point {
                    label: r.value.clone(),
                    x: i as f64,
                    mean: r.mean,
                    std: r.std,
                    bound: r.bound,
                });
            }
            None
        }
    };

    let mut y_values: Vec<f64> = Vec::new();
    for p in &points {
        y_values.push(p.mean + p.std);
        y_values.push((p.mean - p.std).max(0.0));
        if let Some(b) = p.bound {
            y_values.push(b);
        }
    }
    let positive = y_values.iter().all(|&v| v > 0.0);
    let y_scale = if positive {
        pick_scale(&y_values)
    } else {
        let lo = y_values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = y_values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Scale::Linear { lo: lo.min(0.0), hi: hi.max(lo + 1e-12) }
    };

    let (px_l, px_r) = (MARGIN_L, WIDTH - MARGIN_R);
    let (px_b, px_t) = (HEIGHT - MARGIN_B, MARGIN_T);
    let to_x = |p: &Point| match x_scale {
        Some(s) => s.project(p.x, px_l, px_r),
        None => {
            let n = points.len().max(2) as f64;
            px_l + (p.x + 0.5) / n * (px_r - px_l)
        }
    };
    let to_y = |v: f64| y_scale.project(v, px_b, px_t);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">"
    );
    let _ = writeln!(svg, "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>");
    let _ = writeln!(
        svg,
        "<text x=\"{:.2}\" y=\"20\" font-family=\"monospace\" font-size=\"14\">{} vs {}</text>",
        px_l,
        xml_escape(measure),
        xml_escape(axis_label)
    );

    // Frame and y ticks.
    let _ = writeln!(
        svg,
        "<rect x=\"{px_l:.2}\" y=\"{px_t:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"none\" stroke=\"black\"/>",
        px_r - px_l,
        px_b - px_t
    );
    for tick in y_scale.ticks() {
        let y = to_y(tick);
        let _ = writeln!(
            svg,
            "<line x1=\"{px_l:.2}\" y1=\"{y:.2}\" x2=\"{px_r:.2}\" y2=\"{y:.2}\" stroke=\"#dddddd\"/>"
        );
        let _ = writeln!(
            svg,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"monospace\" font-size=\"11\" text-anchor=\"end\">{}</text>",
            px_l - 6.0,
            y + 4.0,
            fmt_tick(tick)
        );
    }

    // X ticks: numeric scale ticks, or one label per category.
    match x_scale {
        Some(s) => {
            for tick in s.ticks() {
                let probe = Point {
                    label: String::new(),
                    x: tick,
                    mean: 0.0,
                    std: 0.0,
                    bound: None,
                };
                let x = to_x(&probe);
                let _ = writeln!(
                    svg,
                    "<text x=\"{x:.2}\" y=\"{:.2}\" font-family=\"monospace\" font-size=\"11\" text-anchor=\"middle\">{}</text>",
                    px_b + 18.0,
                    fmt_tick(tick)
                );
            }
        }
        None => {
            for p in &points {
                let x = to_x(p);
                let _ = writeln!(
                    svg,
                    "<text x=\"{x:.2}\" y=\"{:.2}\" font-family=\"monospace\" font-size=\"11\" text-anchor=\"middle\">{}</text>",
                    px_b + 18.0,
                    xml_escape(&p.label)
                );
            }
        }
    }
    let _ = writeln!(
        svg,
        "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"monospace\" font-size=\"12\" text-anchor=\"middle\">{}</text>",
        (px_l + px_r) / 2.0,
        HEIGHT - 14.0,
        xml_escape(axis_label)
    );

    // Error bars.
    for p in &points {
        let x = to_x(p);
        let hi = to_y(p.mean + p.std);
        let lo_val = match y_scale {
            Scale::Log { lo, .. } => (p.mean - p.std).max(lo),
            Scale::Linear { .. } => p.mean - p.std,
        };
        let lo = to_y(lo_val);
        let _ = writeln!(
            svg,
            "<line x1=\"{x:.2}\" y1=\"{hi:.2}\" x2=\"{x:.2}\" y2=\"{lo:.2}\" stroke=\"#1f77b4\"/>"
        );
        let _ = writeln!(
            svg,
            "<line x1=\"{:.2}\" y1=\"{hi:.2}\" x2=\"{:.2}\" y2=\"{hi:.2}\" stroke=\"#1f77b4\"/>",
            x - 4.0,
            x + 4.0
        );
        let _ = writeln!(
            svg,
            "<line x1=\"{:.2}\" y1=\"{lo:.2}\" x2=\"{:.2}\" y2=\"{lo:.2}\" stroke=\"#1f77b4\"/>",
            x - 4.0,
            x + 4.0
        );
    }

    // Mean polyline and markers.
    let mean_path: Vec<String> = points
        .iter()
        .map(|p| format!("{:.2},{:.2}", to_x(p), to_y(p.mean)))
        .collect();
    let _ = writeln!(
        svg,
        "<polyline points=\"{}\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\"/>",
        mean_path.join(" ")
    );
    for p in &points {
        let _ = writeln!(
            svg,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"#1f77b4\"/>",
            to_x(p),
            to_y(p.mean)
        );
    }

    // Bound overlay, dashed, only where a bound exists.
    let bound_path: Vec<String> = points
        .iter()
        .filter_map(|p| p.bound.map(|b| format!("{:.2},{:.2}", to_x(p), to_y(b))))
        .collect();
    if !bound_path.is_empty() {
        let _ = writeln!(
            svg,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"#d62728\" stroke-width=\"1.5\" stroke-dasharray=\"6 4\"/>",
            bound_path.join(" ")
        );
        let _ = writeln!(
            svg,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"monospace\" font-size=\"11\" fill=\"#d62728\">dashed: bound</text>",
            px_r - 130.0,
            px_t + 14.0
        );
    }
    let _ = writeln!(
        svg,
        "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"monospace\" font-size=\"11\" fill=\"#1f77b4\">solid: mean +/- std</text>",
        px_r - 160.0,
        px_t + 28.0
    );
    svg.push_str("</svg>\n");
    Ok(svg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(value: &str, mean: f64, bound: Option<f64>) -> OutputRow {
        OutputRow {
            axis: "learning_rate".into(),
            value: value.into(),
            lambda: 0.5,
            measure: "argument_stability".into(),
            seeds: 20,
            mean,
            std: mean * 0.1,
            bound,
            bound_valid: bound.map(|_| true),
            failures: 0,
            note: String::new(),
        }
    }

    #[test]
    fn renders_numeric_axis_with_bound_overlay() {
        let rows = vec![
            row("0.001", 0.01, Some(0.05)),
            row("0.01", 0.08, Some(0.4)),
            row("0.1", 0.6, Some(3.0)),
        ];
        let svg = render_measure_plot(&rows, "learning_rate", "argument_stability").unwrap();
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("stroke-dasharray"));
        assert!(svg.contains("argument_stability vs learning_rate"));
    }

    #[test]
    fn rendering_is_deterministic() {
        let rows = vec![row("0.001", 0.01, None), row("0.01", 0.08, None)];
        let a = render_measure_plot(&rows, "learning_rate", "argument_stability").unwrap();
        let b = render_measure_plot(&rows, "learning_rate", "argument_stability").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn categorical_axis_uses_value_labels() {
        let mut rows = vec![row("ring", 0.02, None), row("star", 0.01, None)];
        for r in &mut rows {
            r.axis = "topology".into();
        }
        let svg = render_measure_plot(&rows, "topology", "argument_stability").unwrap();
        assert!(svg.contains(">ring<"));
        assert!(svg.contains(">star<"));
    }

    #[test]
    fn empty_measure_is_an_error() {
        let rows = vec![row("0.001", 0.01, None)];
        assert!(render_measure_plot(&rows, "learning_rate", "weak_stability").is_err());
    }
}
