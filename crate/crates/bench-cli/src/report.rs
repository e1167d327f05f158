//! File output: records, summaries, plot-ready data and the manifest.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::{BenchConfig, Estimator};
use crate::records::{write_csv_or_header, RunRecord, RECORD_HEADER};
use crate::runner::BenchOutput;
use crate::summary::{FiveNumber, SummaryRow};

#[derive(Debug, thiserror::Error)]
#[error("writing {path}: {source}")]
pub struct ReportError {
    pub path: PathBuf,
    #[source]
    pub source: io::Error,
}

/// Flat CSV image of a `SummaryRow`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SummaryCsvRow {
    estimator: Estimator,
    variant: String,
    records: usize,
    failures: usize,
    fit_count: Option<usize>,
    fit_mean: Option<f64>,
    fit_min: Option<f64>,
    fit_q1: Option<f64>,
    fit_median: Option<f64>,
    fit_q3: Option<f64>,
    fit_max: Option<f64>,
    coverage_mean: Option<f64>,
    coverage_median: Option<f64>,
    set_size_mean: Option<f64>,
    set_size_median: Option<f64>,
}

/// Boxplot statistics of one metric in one (estimator, variant) group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct BoxRow {
    estimator: Estimator,
    variant: String,
    count: usize,
    mean: f64,
    min: f64,
    q1: f64,
    median: f64,
    q3: f64,
    max: f64,
}

/// One raw point backing a boxplot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct PointRow {
    run_index: usize,
    estimator: Estimator,
    variant: String,
    value: f64,
}

fn wrap<T>(path: &Path, r: io::Result<T>) -> Result<T, ReportError> {
    r.map_err(|source| ReportError { path: path.to_path_buf(), source })
}

fn emit<T: Serialize>(
    dir: &Path,
    name: &str,
    rows: &[T],
    header: &[&str],
) -> Result<PathBuf, ReportError> {
    let path = dir.join(name);
    wrap(&path, write_csv_or_header(&path, rows, header))?;
    Ok(path)
}

fn metric_files(
    dir: &Path,
    name: &str,
    records: &[RunRecord],
    summary: &[SummaryRow],
    value: fn(&RunRecord) -> Option<f64>,
    stats: fn(&SummaryRow) -> Option<FiveNumber>,
) -> Result<(), ReportError> {
    let points: Vec<PointRow> = records
        .iter()
        .filter_map(|r| {
            value(r).map(|v| PointRow {
                run_index: r.run_index,
                estimator: r.estimator,
                variant: r.variant.clone(),
                value: v,
            })
        })
        .collect();
    let boxes: Vec<BoxRow> = summary
        .iter()
        .filter_map(|s| {
            stats(s).map(|f| BoxRow {
                estimator: s.estimator,
                variant: s.variant.clone(),
                count: f.count,
                mean: f.mean,
                min: f.min,
                q1: f.q1,
                median: f.median,
                q3: f.q3,
                max: f.max,
            })
        })
        .collect();
    emit(
        dir,
        &format!("{name}_points.csv"),
        &points,
        &["run_index", "estimator", "variant", "value"],
    )?;
    emit(
        dir,
        &format!("{name}_box.csv"),
        &boxes,
        &["estimator", "variant", "count", "mean", "min", "q1", "median", "q3", "max"],
    )?;
    Ok(())
}

/// Write all result files into `out_dir`:
/// `records.csv`, `timings.csv`, `summary.csv`, `summary.txt`,
/// `{fit,coverage,set_size}_{points,box}.csv` (boxplot data per index),
/// `envelopes.csv` (per-run confidence bands), `eta.csv` (tuned
/// hyperparameters) and `manifest.txt`.
pub fn emit_report(
    cfg: &BenchConfig,
    output: &BenchOutput,
    summary: &[SummaryRow],
    out_dir: &Path,
) -> Result<(), ReportError> {
    wrap(out_dir, fs::create_dir_all(out_dir))?;
    emit(out_dir, "records.csv", &output.records, &RECORD_HEADER)?;
    emit(
        out_dir,
        "timings.csv",
        &output.timings,
        &["run_index", "estimator", "variant", "wall_ms"],
    )?;
    emit(
        out_dir,
        "envelopes.csv",
        &output.envelopes,
        &["run_index", "estimator", "variant", "tap", "lower", "upper", "h_true", "h_est"],
    )?;
    emit(out_dir, "eta.csv", &output.etas, &["run_index", "c", "rho", "lambda"])?;

    let summary_rows: Vec<SummaryCsvRow> = summary
        .iter()
        .map(|s| SummaryCsvRow {
            estimator: s.estimator,
            variant: s.variant.clone(),
            records: s.records,
            failures: s.failures,
            fit_count: s.fit.map(|f| f.count),
            fit_mean: s.fit.map(|f| f.mean),
            fit_min: s.fit.map(|f| f.min),
            fit_q1: s.fit.map(|f| f.q1),
            fit_median: s.fit.map(|f| f.median),
            fit_q3: s.fit.map(|f| f.q3),
            fit_max: s.fit.map(|f| f.max),
            coverage_mean: s.coverage.map(|f| f.mean),
            coverage_median: s.coverage.map(|f| f.median),
            set_size_mean: s.set_size.map(|f| f.mean),
            set_size_median: s.set_size.map(|f| f.median),
        })
        .collect();
    emit(
        out_dir,
        "summary.csv",
        &summary_rows,
        &[
            "estimator", "variant", "records", "failures", "fit_count", "fit_mean", "fit_min",
            "fit_q1", "fit_median", "fit_q3", "fit_max", "coverage_mean", "coverage_median",
            "set_size_mean", "set_size_median",
        ],
    )?;

    let txt_path = out_dir.join("summary.txt");
    wrap(&txt_path, fs::write(&txt_path, crate::summary::render_text(summary)))?;

    metric_files(out_dir, "fit", &output.records, summary, |r| r.fit, |s| s.fit)?;
    metric_files(out_dir, "coverage", &output.records, summary, |r| r.coverage, |s| {
        s.coverage
    })?;
    metric_files(out_dir, "set_size", &output.records, summary, |r| r.set_size, |s| {
        s.set_size
    })?;

    let mut manifest = String::new();
    manifest.push_str(&format!(
        "tool = bench {}\nmaster_seed = {}\n",
        env!("CARGO_PKG_VERSION"),
        cfg.master_seed
    ));
    if output.records.is_empty() {
        manifest.push_str("warning = no records produced\n");
    }
    manifest.push_str("\n[config]\n");
    manifest.push_str(&cfg.to_config_string());
    let manifest_path = out_dir.join("manifest.txt");
    wrap(&manifest_path, fs::write(&manifest_path, manifest))?;
    Ok(())
}
