//! Result records and their CSV persistence.

use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::{ConfidenceVariant, Estimator};

/// One row of the results table: the metrics of one (run, estimator,
/// confidence variant) combination. Fields that do not apply to an
/// estimator (e.g. `accept_rate` for PEM with the asymptotic set) are
/// `None` and serialize as empty cells. Wall-clock times live in a separate
/// timings file so the records file is byte-for-byte reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_index: usize,
    /// Seed of this run's random streams.
    pub seed: u64,
    pub estimator: Estimator,
    pub variant: String,
    pub fit: Option<f64>,
    pub coverage: Option<f64>,
    pub set_size: Option<f64>,
    /// Model order chosen by BIC or the oracle (PEM only).
    pub order_selected: Option<usize>,
    /// MCMC acceptance rate (FB and the likelihood-set chains).
    pub accept_rate: Option<f64>,
    /// Failure tag; empty on success.
    #[serde(default)]
    pub error: String,
}

/// Wall-clock time of one record, kept out of the records file because it
/// varies between identical runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRecord {
    pub run_index: usize,
    pub estimator: Estimator,
    pub variant: String,
    pub wall_ms: f64,
}

/// Tap-wise confidence band of one set, for band plots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeRecord {
    pub run_index: usize,
    pub estimator: Estimator,
    pub variant: String,
    /// Lag index, 1-based.
    pub tap: usize,
    pub lower: f64,
    pub upper: f64,
    pub h_true: f64,
    pub h_est: f64,
}

/// Empirical Bayes hyperparameter estimates per run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaRecord {
    pub run_index: usize,
    pub c: f64,
    pub rho: f64,
    pub lambda: f64,
}

pub fn variant_tag(estimator: Estimator, variant: Option<ConfidenceVariant>) -> String {
    match (estimator, variant) {
        (Estimator::Eb, _) => "ellipsoid".into(),
        (Estimator::Fb, _) => "mixture".into(),
        (_, Some(v)) => v.tag().into(),
        (_, None) => "none".into(),
    }
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Header-only file for empty row sets, where serde cannot infer a header.
pub fn write_csv_or_header<T: Serialize>(
    path: &Path,
    rows: &[T],
    header: &[&str],
) -> io::Result<()> {
    if rows.is_empty() {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(header)?;
        w.flush()?;
        return Ok(());
    }
    write_csv(path, rows)
}

pub const RECORD_HEADER: [&str; 10] = [
    "run_index",
    "seed",
    "estimator",
    "variant",
    "fit",
    "coverage",
    "set_size",
    "order_selected",
    "accept_rate",
    "error",
];

pub fn read_records(path: &Path) -> csv::Result<Vec<RunRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().collect()
}

pub fn read_records_from_str(text: &str) -> csv::Result<Vec<RunRecord>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    r.deserialize().collect()
}
