//! Result files: `results.csv`, `summary.json`, `plot.svg` and, for
//! convergence sweeps, `trace.csv`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::runner::{mean_and_std_err, ExperimentResult, TraceRecord, TrialRecord};
use super::spec::{Method, Sweep};
use crate::error::{Error, Result};

pub const RESULT_COLUMNS: [&str; 11] = [
    "grid_value",
    "trial",
    "method",
    "channel_seed",
    "initial_sum_rate",
    "sum_rate",
    "iterations",
    "converged",
    "wall_time_ms",
    "ms_per_iteration",
    "error",
];

/// Columns that legitimately differ between identical runs.
pub const WALL_TIME_COLUMNS: [&str; 2] = ["wall_time_ms", "ms_per_iteration"];

pub const TRACE_COLUMNS: [&str; 11] = [
    "trial",
    "method",
    "iteration",
    "sum_rate",
    "weighted_sum_mse",
    "power_used",
    "min_w",
    "max_w",
    "objective_start",
    "objective_after_digital",
    "objective_after_holo",
];

/// Paths of the files written by [`write_results`].
#[derive(Debug, Clone, PartialEq)]
pub struct OutputFiles {
    pub results: PathBuf,
    pub summary: PathBuf,
    pub plot: PathBuf,
    pub trace: Option<PathBuf>,
}

fn write_table<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<()> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    // Header written by hand so that an empty table still has one.
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_results(result: &ExperimentResult, dir: &Path) -> Result<OutputFiles> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files = OutputFiles {
        results: dir.join("results.csv"),
        summary: dir.join("summary.json"),
        plot: dir.join("plot.svg"),
        trace: matches!(result.spec.sweep, Sweep::Convergence).then(|| dir.join("trace.csv")),
    };
    write_table(&files.results, &RESULT_COLUMNS, &result.records)?;
    if let Some(path) = &files.trace {
        write_table(path, &TRACE_COLUMNS, &result.traces)?;
    }

    let summary = serde_json::json!({
        "spec": result.spec,
        "summary": result.summary,
    });
    let text = serde_json::to_string_pretty(&summary)?;
    fs::write(&files.summary, text + "\n").map_err(|e| Error::io(&files.summary, e))?;

    let svg = render_plot(result);
    fs::write(&files.plot, svg).map_err(|e| Error::io(&files.plot, e))?;
    Ok(files)
}

pub fn read_records(path: &Path) -> Result<Vec<TrialRecord>> {
    read_table(path)
}

pub fn read_traces(path: &Path) -> Result<Vec<TraceRecord>> {
    read_table(path)
}

fn read_table<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(csv_err)
}

struct Series {
    method: Method,
    points: Vec<(f64, f64, f64)>,
}

fn plot_series(result: &ExperimentResult) -> (Vec<Series>, &'static str, &'static str) {
    let methods = &result.spec.methods;
    if matches!(result.spec.sweep, Sweep::Convergence) {
        let series = methods
            .iter()
            .map(|&method| {
                let max_iter = result
                    .traces
                    .iter()
                    .filter(|t| t.method == method)
                    .map(|t| t.iteration)
                    .max()
                    .unwrap_or(0);
                let points = (1..=max_iter)
                    .map(|i| {
                        let rates: Vec<f64> = result
                            .traces
                            .iter()
                            .filter(|t| t.method == method && t.iteration == i)
                            .map(|t| t.sum_rate)
                            .collect();
                        let (m, se) = mean_and_std_err(&rates);
                        (i as f64, m, se)
                    })
                    .collect();
                Series { method, points }
            })
            .collect();
        return (series, "iteration", "sum rate (bit/s/Hz)");
    }
    let (x_label, y_label) = match result.spec.sweep {
        Sweep::Snr { .. } => ("SNR (dB)", "sum rate (bit/s/Hz)"),
        Sweep::Timing { .. } => ("M", "time per iteration (ms)"),
        _ => ("M", "sum rate (bit/s/Hz)"),
    };
    let timing = matches!(result.spec.sweep, Sweep::Timing { .. });
    let series = methods
        .iter()
        .map(|&method| Series {
            method,
            points: result
                .summary
                .iter()
                .filter(|s| s.method == method)
                .map(|s| {
                    if timing {
                        (s.grid_value, s.mean_ms_per_iteration, 0.0)
                    } else {
                        (s.grid_value, s.mean_sum_rate, s.std_err_sum_rate)
                    }
                })
                .filter(|p| p.1.is_finite())
                .collect(),
        })
        .collect();
    (series, x_label, y_label)
}

/// Line plot of mean with standard-error bars per method.
pub fn render_plot(result: &ExperimentResult) -> String {
    const W: f64 = 640.0;
    const H: f64 = 420.0;
    const PAD: f64 = 60.0;
    let (series, x_label, y_label) = plot_series(result);
    let all: Vec<&(f64, f64, f64)> = series.iter().flat_map(|s| &s.points).collect();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for p in &all {
        x0 = x0.min(p.0);
        x1 = x1.max(p.0);
        y0 = y0.min(p.1 - p.2);
        y1 = y1.max(p.1 + p.2);
    }
    if all.is_empty() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<path d="M{PAD} {t} V{b} H{r}" stroke="black" fill="none"/>"#,
        t = PAD,
        b = H - PAD,
        r = W - PAD
    );
    for i in 0..=4 {
        let fx = x0 + (x1 - x0) * i as f64 / 4.0;
        let fy = y0 + (y1 - y0) * i as f64 / 4.0;
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            sx(fx),
            H - PAD + 18.0,
            tick(fx)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            PAD - 6.0,
            sy(fy) + 4.0,
            tick(fy)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{x_label}</text>"#,
        W / 2.0,
        H - 15.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="15" y="{:.1}" text-anchor="middle" transform="rotate(-90 15 {:.1})">{y_label}</text>"#,
        H / 2.0,
        H / 2.0
    );
    for (k, s) in series.iter().enumerate() {
        let color = ["#1f77b4", "#d62728"][k % 2];
        let path: Vec<String> = s
            .points
            .iter()
            .map(|p| format!("{:.2},{:.2}", sx(p.0), sy(p.1)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" stroke="{color}" fill="none" stroke-width="1.5"/>"#,
            path.join(" ")
        );
        for p in s.points.iter().filter(|p| p.2 > 0.0) {
            let _ = writeln!(
                svg,
                r#"<line x1="{x:.2}" x2="{x:.2}" y1="{:.2}" y2="{:.2}" stroke="{color}"/>"#,
                sy(p.1 - p.2),
                sy(p.1 + p.2),
                x = sx(p.0)
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" fill="{color}">{}</text>"#,
            W - PAD - 90.0,
            PAD + 16.0 * k as f64,
            s.method.name()
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn tick(v: f64) -> String {
    if v.abs() >= 100.0 || v == v.round() {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}
