//! Self-contained SVG line plots of metric traces.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::metrics::MetricTrace;

use super::median;

#[derive(Debug, Error)]
pub enum PlotError {
    #[error("no trace records to plot")]
    EmptyTraces,
    #[error("traces mix metrics: {0:?}")]
    MixedMetrics(Vec<String>),
    #[error("cannot write {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

const WIDTH: f64 = 820.0;
const HEIGHT: f64 = 520.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 30.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 80.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

/// One median-over-seeds curve per algorithm, in first-seen order. With
/// `metric = None` every trace must carry a single common metric.
pub fn median_curves(traces: &[MetricTrace], metric: Option<&str>) -> Result<(String, Vec<Curve>), PlotError> {
    let metric = match metric {
        Some(m) => m.to_string(),
        None => {
            let mut names: Vec<String> = Vec::new();
            for t in traces {
                for name in t.metric_names() {
                    if !names.contains(&name) {
                        names.push(name);
                    }
                }
            }
            match names.len() {
                0 => return Err(PlotError::EmptyTraces),
                1 => names.remove(0),
                _ => return Err(PlotError::MixedMetrics(names)),
            }
        }
    };
    let mut groups: Vec<(String, Vec<Vec<(u64, f64)>>)> = Vec::new();
    for t in traces {
        let series = t.series(&metric);
        if series.is_empty() {
            continue;
        }
        let label = t.metadata.get("algorithm").unwrap_or("?").to_string();
        match groups.iter_mut().find(|(l, _)| *l == label) {
            Some((_, runs)) => runs.push(series),
            None => groups.push((label, vec![series])),
        }
    }
    if groups.is_empty() {
        return Err(PlotError::EmptyTraces);
    }
    let curves = groups
        .into_iter()
        .map(|(label, runs)| {
            let points = runs[0]
                .iter()
                .map(|&(it, _)| {
                    let mut values: Vec<f64> = runs
                        .iter()
                        .filter_map(|r| r.binary_search_by_key(&it, |p| p.0).ok().map(|k| r[k].1))
                        .collect();
                    (it as f64, median(&mut values))
                })
                .collect();
            Curve { label, points }
        })
        .collect();
    Ok((metric, curves))
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-2 {
        format!("{v:.0e}")
    } else {
        format!("{}", (v * 1000.0).round() / 1000.0)
    }
}

/// Renders curves against iteration. On a log axis non-positive values are
/// clamped to the smallest positive value plotted.
pub fn render_svg(metric: &str, curves: &[Curve], log_y: bool, footer: &str) -> String {
    let all = || curves.iter().flat_map(|c| c.points.iter());
    let x_max = all().map(|p| p.0).fold(0.0, f64::max).max(1.0);
    let positive_min = all().map(|p| p.1).filter(|v| *v > 0.0).fold(f64::INFINITY, f64::min);
    let floor = if positive_min.is_finite() { positive_min } else { 1e-12 };
    let fy = |v: f64| if log_y { v.max(floor).log10() } else { v };
    let mut y_lo = all().map(|p| fy(p.1)).fold(f64::INFINITY, f64::min);
    let mut y_hi = all().map(|p| fy(p.1)).fold(f64::NEG_INFINITY, f64::max);
    if !y_lo.is_finite() {
        (y_lo, y_hi) = (0.0, 1.0);
    }
    if log_y {
        y_lo = y_lo.floor();
        y_hi = y_hi.ceil();
    } else {
        y_lo = y_lo.min(0.0);
    }
    if y_hi <= y_lo {
        y_hi = y_lo + 1.0;
    }
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + plot_w * x / x_max;
    let sy = |y: f64| TOP + plot_h * (1.0 - (y - y_lo) / (y_hi - y_lo));

    let mut s = String::new();
    let w = &mut s;
    let _ = writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(w, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        w,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(&format!("{metric}{}", if log_y { " (log scale)" } else { "" }))
    );
    let _ = writeln!(
        w,
        r#"<rect x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );
    for k in 0..=5 {
        let x = x_max * k as f64 / 5.0;
        let px = sx(x);
        let _ = writeln!(
            w,
            r##"<line x1="{px:.2}" y1="{}" x2="{px:.2}" y2="{}" stroke="#ccc"/><text x="{px:.2}" y="{}" text-anchor="middle">{}</text>"##,
            TOP,
            TOP + plot_h,
            TOP + plot_h + 16.0,
            tick_label(x)
        );
    }
    let y_ticks: Vec<f64> = if log_y {
        let step = ((y_hi - y_lo) / 8.0).ceil().max(1.0);
        let mut v = Vec::new();
        let mut y = y_lo;
        while y <= y_hi + 1e-9 {
            v.push(y);
            y += step;
        }
        v
    } else {
        (0..=5).map(|k| y_lo + (y_hi - y_lo) * k as f64 / 5.0).collect()
    };
    for y in y_ticks {
        let py = sy(y);
        let label = if log_y { format!("1e{}", y as i64) } else { tick_label(y) };
        let _ = writeln!(
            w,
            r##"<line x1="{LEFT}" y1="{py:.2}" x2="{}" y2="{py:.2}" stroke="#ccc"/><text x="{}" y="{:.2}" text-anchor="end">{label}</text>"##,
            LEFT + plot_w,
            LEFT - 6.0,
            py + 4.0
        );
    }
    let _ = writeln!(
        w,
        r#"<text x="{}" y="{}" text-anchor="middle">iteration</text>"#,
        LEFT + plot_w / 2.0,
        TOP + plot_h + 36.0
    );
    for (i, c) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = c.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(fy(y)))).collect();
        let _ = writeln!(
            w,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            pts.join(" ")
        );
        let ly = TOP + 16.0 + 18.0 * i as f64;
        let lx = LEFT + plot_w - 190.0;
        let _ = writeln!(
            w,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2.5"/><text x="{}" y="{}">{}</text>"#,
            lx + 24.0,
            lx + 30.0,
            ly + 4.0,
            escape(&c.label)
        );
    }
    let _ = writeln!(
        w,
        r##"<text x="{LEFT}" y="{}" font-size="10" fill="#555">{}</text>"##,
        HEIGHT - 12.0,
        escape(footer)
    );
    s.push_str("</svg>\n");
    s
}

/// Writes the median curves of `traces` as an SVG file. The footer carries
/// the config digests found in the traces.
pub fn emit_plot(traces: &[MetricTrace], metric: Option<&str>, out: &Path, log_y: bool) -> Result<(), PlotError> {
    let (metric, curves) = median_curves(traces, metric)?;
    let mut digests: Vec<&str> = Vec::new();
    for t in traces {
        if let Some(d) = t.metadata.get("config_digest") {
            if !digests.contains(&d) {
                digests.push(d);
            }
        }
    }
    let footer = format!("config sha256: {}", digests.join(", "));
    let svg = render_svg(&metric, &curves, log_y, &footer);
    let io = |source| PlotError::Io { path: out.display().to_string(), source };
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io)?;
    }
    fs::write(out, svg).map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::TraceMetadata;

    fn trace(alg: &str, seed: u64, metric: &str, values: &[f64]) -> MetricTrace {
        let mut t = MetricTrace::new(TraceMetadata::new(alg, seed, "d1g"));
        for (i, v) in values.iter().enumerate() {
            t.push(i as u64 * 10, metric, *v).unwrap();
        }
        t
    }

    #[test]
    fn medians_per_algorithm() {
        let traces = vec![
            trace("scl", 0, "d2", &[1.0, 0.5]),
            trace("scl", 1, "d2", &[3.0, 0.1]),
            trace("scl", 2, "d2", &[2.0, 0.3]),
            trace("som:2", 0, "d2", &[1.0, 0.2]),
        ];
        let (metric, curves) = median_curves(&traces, None).unwrap();
        assert_eq!(metric, "d2");
        assert_eq!(curves.len(), 2);
        assert_eq!(curves[0].points, vec![(0.0, 2.0), (10.0, 0.3)]);
    }

    #[test]
    fn svg_has_one_curve_per_algorithm() {
        let traces: Vec<MetricTrace> =
            ["scl", "som:2", "som:4", "som:8"].iter().map(|a| trace(a, 0, "d2", &[1.0, 0.1, 0.01])).collect();
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("p.svg");
        emit_plot(&traces, None, &out, true).unwrap();
        let svg = fs::read_to_string(&out).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 4);
        assert!(svg.contains("config sha256: d1g"));
        let single = render_svg("d2", &median_curves(&traces[..1], None).unwrap().1, false, "");
        assert_eq!(single.matches("<polyline").count(), 1);
    }

    #[test]
    fn error_paths() {
        let mixed = vec![trace("scl", 0, "d2", &[1.0]), trace("scl", 1, "distortion", &[1.0])];
        assert!(matches!(median_curves(&mixed, None), Err(PlotError::MixedMetrics(_))));
        assert!(median_curves(&mixed, Some("d2")).is_ok());
        assert!(matches!(median_curves(&[], None), Err(PlotError::EmptyTraces)));
    }
}
