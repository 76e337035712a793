//! CSV tables and standalone SVG charts.

use std::path::Path;

use crate::credit::Quadrant;
use crate::error::{LabError, Result};
use crate::evaluation::EvalReport;
use crate::trainer::{MetricsRow, METRICS_COLUMNS};

use super::analysis::AnalysisBundle;
use super::OutputDir;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

pub enum ReportInput<'a> {
    Metrics(&'a [MetricsRow]),
    Eval(&'a EvalReport),
    Analysis(&'a AnalysisBundle),
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn span(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if lo == hi {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn frame(title: &str, x_label: &str, y_label: &str, x: (f64, f64), y: (f64, f64)) -> String {
    let (x0, y0, x1, y1) = (LEFT, HEIGHT - BOTTOM, WIDTH - RIGHT, TOP);
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    );
    s.push_str(&format!("<rect x=\"0\" y=\"0\" width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"));
    s.push_str(&format!(
        "<text x=\"{:.2}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">{}</text>\n",
        WIDTH / 2.0,
        escape(title)
    ));
    s.push_str(&format!(
        "<line x1=\"{x0:.2}\" y1=\"{y0:.2}\" x2=\"{x1:.2}\" y2=\"{y0:.2}\" stroke=\"black\"/>\n\
         <line x1=\"{x0:.2}\" y1=\"{y0:.2}\" x2=\"{x0:.2}\" y2=\"{y1:.2}\" stroke=\"black\"/>\n"
    ));
    let label = |x: f64, y: f64, anchor: &str, text: String| {
        format!(
            "<text x=\"{x:.2}\" y=\"{y:.2}\" text-anchor=\"{anchor}\" font-family=\"sans-serif\" font-size=\"11\">{}</text>\n",
            escape(&text)
        )
    };
    s.push_str(&label(x0, y0 + 16.0, "start", format!("{:.4}", x.0)));
    s.push_str(&label(x1, y0 + 16.0, "end", format!("{:.4}", x.1)));
    s.push_str(&label(x0 - 6.0, y0, "end", format!("{:.4}", y.0)));
    s.push_str(&label(x0 - 6.0, y1 + 4.0, "end", format!("{:.4}", y.1)));
    s.push_str(&label((x0 + x1) / 2.0, HEIGHT - 12.0, "middle", x_label.to_string()));
    s.push_str(&format!(
        "<text x=\"16\" y=\"{:.2}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\" transform=\"rotate(-90 16 {:.2})\">{}</text>\n",
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(y_label)
    ));
    s
}

fn project(v: f64, range: (f64, f64), a: f64, b: f64) -> f64 {
    a + (v - range.0) / (range.1 - range.0) * (b - a)
}

/// One-series line chart. Non-finite points are skipped.
pub fn line_chart_svg(title: &str, x_label: &str, y_label: &str, points: &[(f64, f64)]) -> String {
    let pts: Vec<(f64, f64)> = points.iter().copied().filter(|p| p.0.is_finite() && p.1.is_finite()).collect();
    let xr = span(pts.iter().map(|p| p.0));
    let yr = span(pts.iter().map(|p| p.1));
    let mut s = frame(title, x_label, y_label, xr, yr);
    let coords: Vec<String> = pts
        .iter()
        .map(|&(x, y)| {
            format!(
                "{:.2},{:.2}",
                project(x, xr, LEFT, WIDTH - RIGHT),
                project(y, yr, HEIGHT - BOTTOM, TOP)
            )
        })
        .collect();
    s.push_str(&format!(
        "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" points=\"{}\"/>\n",
        coords.join(" ")
    ));
    s.push_str("</svg>\n");
    s
}

/// Grouped bar chart: one cluster per label, one bar per series.
pub fn bar_chart_svg(title: &str, y_label: &str, labels: &[String], series: &[(&str, Vec<f64>)]) -> String {
    const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];
    let top = series.iter().flat_map(|s| s.1.iter().copied()).fold(0.0, f64::max);
    let yr = (0.0, if top > 0.0 { top } else { 1.0 });
    let mut s = frame(title, "", y_label, (0.0, labels.len() as f64), yr);
    let slot = (WIDTH - RIGHT - LEFT) / labels.len().max(1) as f64;
    let bar = slot * 0.8 / series.len().max(1) as f64;
    for (si, (name, values)) in series.iter().enumerate() {
        let color = COLORS[si % COLORS.len()];
        for (i, &v) in values.iter().enumerate() {
            let y = project(v, yr, HEIGHT - BOTTOM, TOP);
            s.push_str(&format!(
                "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{color}\"><title>{} {}</title></rect>\n",
                LEFT + i as f64 * slot + slot * 0.1 + si as f64 * bar,
                y,
                bar,
                HEIGHT - BOTTOM - y,
                escape(name),
                escape(&labels[i]),
            ));
        }
        s.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"11\" fill=\"{color}\">{}</text>\n",
            WIDTH - RIGHT - 90.0,
            TOP + 14.0 * (si as f64 + 1.0),
            escape(name)
        ));
    }
    s.push_str("</svg>\n");
    s
}

fn series_csv(header: &str, points: &[(f64, f64)]) -> String {
    let mut out = format!("{header}\n");
    for (x, y) in points {
        out.push_str(&format!("{x},{y}\n"));
    }
    out
}

/// Writes one series as CSV and, when non-empty, as an SVG line chart.
fn emit_series(
    out: &mut OutputDir,
    stem: &str,
    header: &str,
    labels: (&str, &str, &str),
    points: &[(f64, f64)],
) -> Result<()> {
    out.write(&format!("{stem}.csv"), series_csv(header, points).as_bytes())?;
    if points.is_empty() {
        return Err(LabError::EmptyInput(format!("{stem}: empty series")));
    }
    out.write(&format!("{stem}.svg"), line_chart_svg(labels.0, labels.1, labels.2, points).as_bytes())?;
    Ok(())
}

/// Writes tables and charts for `input` into `dir`, plus a manifest.
///
/// An empty series still gets its header-only CSV, but no SVG, and the call
/// returns `EmptyInput`.
pub fn emit_report(input: ReportInput<'_>, dir: &Path) -> Result<()> {
    let mut out = OutputDir::create(dir)?;
    let result = emit_into(input, &mut out);
    out.finish()?;
    result
}

fn emit_into(input: ReportInput<'_>, out: &mut OutputDir) -> Result<()> {
    match input {
        ReportInput::Metrics(rows) => {
            let solve: Vec<(f64, f64)> = rows.iter().map(|r| (r.step as f64, r.solve_rate)).collect();
            let entropy: Vec<(f64, f64)> = rows.iter().map(|r| (r.step as f64, r.mean_entropy)).collect();
            let a = emit_series(out, "solve_rate", "step,solve_rate", ("Training solve rate", "step", "solve rate"), &solve);
            let b = emit_series(out, "entropy", "step,mean_entropy", ("Training entropy", "step", "entropy (nats)"), &entropy);
            a.and(b)
        }
        ReportInput::Eval(report) => {
            let pts: Vec<(f64, f64)> = report.curve.iter().map(|p| (p.k as f64, p.pass_at_k)).collect();
            out.write("pass_at_k.csv", report.to_csv().as_bytes())?;
            if pts.is_empty() {
                return Err(LabError::EmptyInput("pass@k: empty curve".into()));
            }
            out.write("pass_at_k.svg", line_chart_svg("Pass@k", "k", "pass@k", &pts).as_bytes())?;
            Ok(())
        }
        ReportInput::Analysis(bundle) => {
            out.write("entropy_histogram.csv", bundle.histogram_csv().as_bytes())?;
            out.write("quadrant_shares.csv", bundle.quadrant_csv().as_bytes())?;
            let labels: Vec<String> =
                bundle.bin_edges.windows(2).map(|w| format!("{:.3}-{:.3}", w[0], w[1])).collect();
            let freq = |c: &[u64]| {
                let t: u64 = c.iter().sum();
                c.iter().map(|&x| if t == 0 { 0.0 } else { x as f64 / t as f64 }).collect::<Vec<f64>>()
            };
            let hist = bar_chart_svg(
                "Token entropy by reward polarity",
                "frequency",
                &labels,
                &[("positive", freq(&bundle.counts_pos)), ("negative", freq(&bundle.counts_neg))],
            );
            out.write("entropy_histogram.svg", hist.as_bytes())?;
            let qlabels: Vec<String> = Quadrant::ALL.iter().map(|q| q.to_string()).collect();
            let shares = bar_chart_svg("Quadrant token shares", "share", &qlabels, &[("share", bundle.quadrant_shares.to_vec())]);
            out.write("quadrant_shares.svg", shares.as_bytes())?;
            Ok(())
        }
    }
}

/// Parses a metrics CSV written by the trainer.
pub fn parse_metrics_csv(text: &str) -> Result<Vec<MetricsRow>> {
    let mut lines = text.lines().enumerate();
    let header = lines.next().map(|l| l.1).unwrap_or("");
    let cols: Vec<&str> = header.split(',').collect();
    if cols != METRICS_COLUMNS {
        return Err(LabError::Parse { line: 1, message: "unexpected metrics header".into() });
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |m: String| LabError::Parse { line: i + 1, message: m };
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != cols.len() {
            return Err(bad(format!("expected {} fields, got {}", cols.len(), f.len())));
        }
        let num = |j: usize| f[j].parse::<f64>().map_err(|e| bad(format!("{}: {e}", cols[j])));
        let int = |j: usize| f[j].parse::<usize>().map_err(|e| bad(format!("{}: {e}", cols[j])));
        rows.push(MetricsRow {
            step: int(0)?,
            skipped: int(1)? != 0,
            solve_rate: num(2)?,
            mean_entropy: num(3)?,
            quadrant_shares: [num(4)?, num(5)?, num(6)?, num(7)?],
            loss_total: num(8)?,
            quadrant_losses: [num(9)?, num(10)?, num(11)?, num(12)?],
            proxy_cmi: num(13)?,
            exact_cmi: num(14)?,
            bound_violations: int(15)?,
            filtered_fraction: num(16)?,
            ratio_min: num(17)?,
            ratio_max: num(18)?,
            clip_fraction: num(19)?,
            updates: int(20)?,
            wall_time: 0.0,
        });
    }
    Ok(rows)
}

/// Renders every known artifact found in a run or analysis directory.
pub fn report_dir(input: &Path, output: &Path) -> Result<()> {
    let metrics = input.join("metrics.csv");
    let eval = input.join("eval_report.json");
    let analysis = input.join("analysis.json");
    let mut found = false;
    let mut outcome = Ok(());
    if metrics.exists() {
        found = true;
        let rows = parse_metrics_csv(&super::read_text(&metrics)?)?;
        outcome = outcome.and(emit_report(ReportInput::Metrics(&rows), &output.join("metrics")));
    }
    if eval.exists() {
        found = true;
        let report: EvalReport = serde_json::from_str(&super::read_text(&eval)?)
            .map_err(|e| LabError::Parse { line: e.line(), message: e.to_string() })?;
        outcome = outcome.and(emit_report(ReportInput::Eval(&report), &output.join("eval")));
    }
    if analysis.exists() {
        found = true;
        let bundle: AnalysisBundle = serde_json::from_str(&super::read_text(&analysis)?)
            .map_err(|e| LabError::Parse { line: e.line(), message: e.to_string() })?;
        outcome = outcome.and(emit_report(ReportInput::Analysis(&bundle), &output.join("analysis")));
    }
    if !found {
        return Err(LabError::EmptyInput(format!(
            "{} has no metrics.csv, eval_report.json or analysis.json",
            input.display()
        )));
    }
    outcome
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn row(step: usize, solve: f64) -> MetricsRow {
        MetricsRow {
            step,
            skipped: false,
            solve_rate: solve,
            mean_entropy: 1.0 - solve,
            quadrant_shares: [0.25; 4],
            loss_total: 0.0,
            quadrant_losses: [0.0; 4],
            proxy_cmi: 0.0,
            exact_cmi: f64::NAN,
            bound_violations: 0,
            filtered_fraction: 0.5,
            ratio_min: 1.0,
            ratio_max: 1.0,
            clip_fraction: 0.0,
            updates: 1,
            wall_time: 0.0,
        }
    }

    #[test]
    fn empty_series_writes_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let err = emit_report(ReportInput::Metrics(&[]), dir.path()).unwrap_err();
        assert!(matches!(err, LabError::EmptyInput(_)));
        assert_eq!(fs::read_to_string(dir.path().join("solve_rate.csv")).unwrap(), "step,solve_rate\n");
        assert!(!dir.path().join("solve_rate.svg").exists());
        assert_ne!(err.exit_code(), 0);
    }

    #[test]
    fn two_points_give_one_polyline_with_two_vertices() {
        let dir = tempfile::tempdir().unwrap();
        emit_report(ReportInput::Metrics(&[row(0, 0.1), row(1, 0.3)]), dir.path()).unwrap();
        let svg = fs::read_to_string(dir.path().join("solve_rate.svg")).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 1);
        let start = svg.find("points=\"").unwrap() + 8;
        let end = start + svg[start..].find('"').unwrap();
        assert_eq!(svg[start..end].split_whitespace().count(), 2);
    }

    #[test]
    fn rendering_is_deterministic() {
        let rows = [row(0, 0.1), row(1, 0.3), row(2, 0.2)];
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        emit_report(ReportInput::Metrics(&rows), a.path()).unwrap();
        emit_report(ReportInput::Metrics(&rows), b.path()).unwrap();
        for f in ["solve_rate.svg", "entropy.csv", "manifest.json"] {
            assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap());
        }
    }

    #[test]
    fn metrics_csv_round_trip() {
        let rows = vec![row(0, 0.125), row(1, 0.5)];
        let mut text = MetricsRow::csv_header();
        text.push('\n');
        for r in &rows {
            text.push_str(&r.csv_line());
            text.push('\n');
        }
        let back = parse_metrics_csv(&text).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[1].solve_rate, 0.5);
        assert!(back[0].exact_cmi.is_nan());
    }
}
