//! Aggregation of run records into per-estimator statistics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::config::Estimator;
use crate::records::RunRecord;

/// Boxplot statistics of one metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiveNumber {
    pub count: usize,
    pub mean: f64,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Summary of one (estimator, variant) group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub estimator: Estimator,
    pub variant: String,
    pub records: usize,
    pub failures: usize,
    pub fit: Option<FiveNumber>,
    pub coverage: Option<FiveNumber>,
    pub set_size: Option<FiveNumber>,
}

/// Linear-interpolation quantile of a sorted slice.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    assert!(n > 0);
    if n == 1 {
        return sorted[0];
    }
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

pub fn five_number(values: &[f64]) -> Option<FiveNumber> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    Some(FiveNumber {
        count: sorted.len(),
        mean: sorted.iter().sum::<f64>() / sorted.len() as f64,
        min: sorted[0],
        q1: quantile_sorted(&sorted, 0.25),
        median: quantile_sorted(&sorted, 0.5),
        q3: quantile_sorted(&sorted, 0.75),
        max: sorted[sorted.len() - 1],
    })
}

/// Group records by (estimator, variant) and summarize each metric over the
/// successful rows. Order-insensitive in the input records.
pub fn summarize(records: &[RunRecord]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(Estimator, String), Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        groups
            .entry((r.estimator, r.variant.clone()))
            .or_default()
            .push(r);
    }
    groups
        .into_iter()
        .map(|((estimator, variant), rows)| {
            let failures = rows.iter().filter(|r| !r.error.is_empty()).count();
            let collect = |f: fn(&RunRecord) -> Option<f64>| -> Vec<f64> {
                rows.iter().filter_map(|r| f(r)).collect()
            };
            SummaryRow {
                estimator,
                variant,
                records: rows.len(),
                failures,
                fit: five_number(&collect(|r| r.fit)),
                coverage: five_number(&collect(|r| r.coverage)),
                set_size: five_number(&collect(|r| r.set_size)),
            }
        })
        .collect()
}

/// Human-readable table of the summary rows.
pub fn render_text(rows: &[SummaryRow]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<10} {:<10} {:>5} {:>5}  {:>10} {:>10}  {:>10} {:>10}  {:>12} {:>12}\n",
        "estimator", "variant", "rows", "fail", "fit mean", "fit med", "cov mean", "cov med",
        "size mean", "size med"
    ));
    let cell = |s: &Option<FiveNumber>, f: fn(&FiveNumber) -> f64| match s {
        Some(v) => format!("{:.4}", f(v)),
        None => "-".into(),
    };
    for row in rows {
        out.push_str(&format!(
            "{:<10} {:<10} {:>5} {:>5}  {:>10} {:>10}  {:>10} {:>10}  {:>12} {:>12}\n",
            row.estimator.tag(),
            row.variant,
            row.records,
            row.failures,
            cell(&row.fit, |v| v.mean),
            cell(&row.fit, |v| v.median),
            cell(&row.coverage, |v| v.mean),
            cell(&row.coverage, |v| v.median),
            cell(&row.set_size, |v| v.mean),
            cell(&row.set_size, |v| v.median),
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(est: Estimator, variant: &str, fit: f64) -> RunRecord {
        RunRecord {
            run_index: 0,
            seed: 0,
            estimator: est,
            variant: variant.into(),
            fit: Some(fit),
            coverage: Some(fit / 100.0),
            set_size: Some(1.0),
            order_selected: None,
            accept_rate: None,
            error: String::new(),
        }
    }

    #[test]
    fn single_record_mean_equals_median() {
        let rows = summarize(&[record(Estimator::Eb, "ellipsoid", 81.0)]);
        assert_eq!(rows.len(), 1);
        let fit = rows[0].fit.unwrap();
        assert_eq!(fit.mean, 81.0);
        assert_eq!(fit.median, 81.0);
        assert_eq!(fit.min, 81.0);
        assert_eq!(fit.max, 81.0);
    }

    #[test]
    fn summary_is_order_independent() {
        let a = vec![
            record(Estimator::Eb, "ellipsoid", 70.0),
            record(Estimator::Fb, "mixture", 75.0),
            record(Estimator::Eb, "ellipsoid", 90.0),
        ];
        let mut b = a.clone();
        b.reverse();
        assert_eq!(summarize(&a), summarize(&b));
    }

    #[test]
    fn quartiles_of_known_sample() {
        let v = five_number(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!(v.q1, 2.0);
        assert_eq!(v.median, 3.0);
        assert_eq!(v.q3, 4.0);
        assert_eq!(v.mean, 3.0);
    }

    #[test]
    fn failed_rows_counted_but_not_averaged() {
        let mut bad = record(Estimator::Eb, "ellipsoid", 0.0);
        bad.fit = None;
        bad.coverage = None;
        bad.set_size = None;
        bad.error = "chain stalled".into();
        let rows = summarize(&[record(Estimator::Eb, "ellipsoid", 80.0), bad]);
        assert_eq!(rows[0].records, 2);
        assert_eq!(rows[0].failures, 1);
        assert_eq!(rows[0].fit.unwrap().count, 1);
        assert_eq!(rows[0].fit.unwrap().mean, 80.0);
    }
}
