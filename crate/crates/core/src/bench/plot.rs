use std::fmt::Write as _;
use std::path::Path;

use super::{summarize, ErrorMetric, ExperimentRecord, SweepSummary};
use crate::error::{Result, SlsError};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 56.0;

/// Log-log plot of the mean error per sweep point with min/max whiskers.
/// Points where every repeat failed are left out.
pub fn render_svg(records: &[ExperimentRecord], metric: ErrorMetric, x_label: &str) -> Result<String> {
    if records.is_empty() {
        return Err(SlsError::InvalidInput("nothing to plot".into()));
    }
    let points: Vec<SweepSummary> = summarize(records, metric)
        .into_iter()
        .filter(|s| s.mean > 0.0 && s.mean.is_finite())
        .collect();

    let (x0, x1) = log_range(points.iter().map(|s| s.sweep_value));
    let (y0, y1) = log_range(points.iter().flat_map(|s| [s.min.max(f64::MIN_POSITIVE), s.max]));
    let px = |v: f64| LEFT + (v.log10() - x0) / (x1 - x0) * (WIDTH - LEFT - RIGHT);
    let py = |v: f64| HEIGHT - BOTTOM - (v.log10() - y0) / (y1 - y0) * (HEIGHT - TOP - BOTTOM);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{} vs {} (mean, min/max whiskers)</text>"#,
        WIDTH / 2.0,
        metric.name(),
        escape(x_label)
    );

    // axes and decade ticks
    let (ax0, ay0, ax1, ay1) = (LEFT, HEIGHT - BOTTOM, WIDTH - RIGHT, TOP);
    let _ = writeln!(
        s,
        r#"<path d="M{ax0},{ay1} L{ax0},{ay0} L{ax1},{ay0}" fill="none" stroke="black"/>"#
    );
    for t in ticks(x0, x1) {
        let x = px(10f64.powf(t));
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{ay0}" x2="{x:.2}" y2="{}" stroke="black"/><text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#,
            ay0 + 5.0,
            ay0 + 18.0,
            tick_label(t)
        );
    }
    for t in ticks(y0, y1) {
        let y = py(10f64.powf(t));
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{y:.2}" x2="{ax0}" y2="{y:.2}" stroke="black"/><text x="{}" y="{:.2}" text-anchor="end">{}</text>"#,
            ax0 - 5.0,
            ax0 - 8.0,
            y + 4.0,
            tick_label(t)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        (ax0 + ax1) / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{0}" text-anchor="middle" transform="rotate(-90 18 {0})">{1}</text>"#,
        (ay0 + ay1) / 2.0,
        metric.name()
    );

    if points.len() >= 2 {
        let path: Vec<String> = points.iter().map(|p| format!("{:.2},{:.2}", px(p.sweep_value), py(p.mean))).collect();
        let _ = writeln!(
            s,
            r##"<polyline points="{}" fill="none" stroke="#1f5fa8" stroke-width="1.5"/>"##,
            path.join(" ")
        );
    }
    for p in &points {
        let x = px(p.sweep_value);
        let (lo, hi) = (py(p.min.max(f64::MIN_POSITIVE)), py(p.max));
        let _ = writeln!(
            s,
            r##"<path d="M{x:.2},{lo:.2} L{x:.2},{hi:.2} M{:.2},{lo:.2} L{:.2},{lo:.2} M{:.2},{hi:.2} L{:.2},{hi:.2}" stroke="#1f5fa8"/>"##,
            x - 4.0,
            x + 4.0,
            x - 4.0,
            x + 4.0
        );
        let _ = writeln!(
            s,
            r##"<circle cx="{x:.2}" cy="{:.2}" r="3.5" fill="#1f5fa8"><title>{} = {}: mean {:.4e} over {} runs, {} failed</title></circle>"##,
            py(p.mean),
            escape(x_label),
            p.sweep_value,
            p.mean,
            p.count,
            p.failures
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn emit_plot(records: &[ExperimentRecord], metric: ErrorMetric, x_label: &str, path: &Path) -> Result<()> {
    std::fs::write(path, render_svg(records, metric, x_label)?)?;
    Ok(())
}

/// `log10` range of the values, padded; a unit range around 1 when empty.
fn log_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| *v > 0.0 && v.is_finite())
        .map(f64::log10)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (-0.5, 0.5);
    }
    let pad = ((hi - lo) * 0.08).max(0.15);
    (lo - pad, hi + pad)
}

/// Integer decades inside the range, or its midpoint when there are none.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let t: Vec<f64> = (lo.ceil() as i32..=hi.floor() as i32).map(f64::from).collect();
    if t.is_empty() {
        vec![((lo + hi) / 2.0 * 10.0).round() / 10.0]
    } else {
        t
    }
}

fn tick_label(t: f64) -> String {
    if t.fract() == 0.0 {
        format!("1e{}", t as i32)
    } else {
        format!("{:.3}", 10f64.powf(t))
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}
