//! Monte Carlo benchmark harness comparing classical and Bayesian
//! output-error identification: dataset generation, estimator execution,
//! metric aggregation and CSV reporting. The `bench` binary is a thin CLI
//! over this library.

pub mod config;
pub mod records;
pub mod report;
pub mod runner;
pub mod seed;
pub mod summary;
