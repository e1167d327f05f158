//! Identification of discrete-time output-error models from input-output data.
//!
//! The crate provides two families of estimators for the impulse response of a
//! SISO linear system observed through additive white output noise:
//!
//! * classical prediction-error estimation of rational models ([`pem`]), with
//!   BIC and oracle order selection, the asymptotic parameter covariance, and
//!   two sampled confidence sets (truncated-asymptotic and likelihood MCMC);
//! * kernel-based Bayesian estimation ([`kernel`], [`mcmc`]) with a DC-kernel
//!   Gaussian prior, Empirical Bayes hyperparameter tuning by marginal
//!   likelihood, and a Full Bayes variant that integrates the hyperparameters
//!   out with an adaptive Metropolis chain.
//!
//! [`metrics`] implements the three indices used to compare the estimators
//! (impulse-response fit, coverage, envelope size), and [`system`] holds the
//! data model: system generation, band-limited input synthesis and
//! output-error simulation.

pub mod chi2;
pub mod confidence;
pub mod error;
pub mod kernel;
pub mod mcmc;
pub mod metrics;
pub mod pem;
pub mod poly;
pub mod system;

pub use confidence::ConfidenceSet;
pub use error::SysidError;
pub use system::{Dataset, DiscreteSystem, ImpulseResponse, RegressorMatrix};
