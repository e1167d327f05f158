//! Sampled confidence sets and shared multivariate Gaussian helpers.
//!
//! A confidence set is a finite collection of impulse responses scored by a
//! (log) density; members are the samples whose score reaches the
//! `(1-alpha)`-percentile of the scored sample pool.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::system::ImpulseResponse;

/// Samples retained at level `alpha`, with the per-member log-density scores
/// used for thresholding.
#[derive(Debug, Clone)]
pub struct ConfidenceSet {
    pub members: Vec<ImpulseResponse>,
    /// Log of the density each member was scored by.
    pub scores: Vec<f64>,
    pub alpha: f64,
    /// Score of the weakest retained member (log scale).
    pub threshold: f64,
}

impl ConfidenceSet {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Retain the `ceil(alpha * N)` samples with the highest scores; ties at the
/// threshold are resolved in sample-index order.
pub fn retain_top_fraction(
    samples: Vec<ImpulseResponse>,
    scores: Vec<f64>,
    alpha: f64,
) -> ConfidenceSet {
    assert_eq!(samples.len(), scores.len());
    assert!(alpha > 0.0 && alpha <= 1.0);
    let n = samples.len();
    let keep = (alpha * n as f64).ceil() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    // sort by descending score, ascending index on ties
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    order.truncate(keep);
    order.sort_unstable(); // keep members in original sample order
    let threshold = order
        .iter()
        .map(|&i| scores[i])
        .fold(f64::INFINITY, f64::min);
    let mut members = Vec::with_capacity(keep);
    let mut kept_scores = Vec::with_capacity(keep);
    let mut samples: Vec<Option<ImpulseResponse>> = samples.into_iter().map(Some).collect();
    for &i in &order {
        members.push(samples[i].take().unwrap());
        kept_scores.push(scores[i]);
    }
    ConfidenceSet { members, scores: kept_scores, alpha, threshold }
}

/// Multivariate Gaussian with a factored covariance, supporting sampling and
/// log-density evaluation.
///
/// Factored as `cov = B B^T`. When the Cholesky factorization fails the
/// factor falls back to a symmetric eigendecomposition with negative
/// eigenvalues clamped to zero, so positive-semidefinite (including
/// singular) covariances are handled; the log-density then uses the
/// pseudo-determinant and pseudo-inverse on the positive eigenspace.
#[derive(Debug, Clone)]
pub struct GaussianFactor {
    pub mean: DVector<f64>,
    factor: DMatrix<f64>,
    /// Inverse applied through the factor; `None` when the covariance is
    /// rank-deficient and the eigen path is used.
    chol: Option<Cholesky<f64, nalgebra::Dyn>>,
    /// Eigen data for the rank-deficient path: (vectors, clamped values).
    eigen: Option<(DMatrix<f64>, DVector<f64>)>,
    log_det: f64,
    dim: usize,
}

impl GaussianFactor {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Self {
        let dim = mean.len();
        assert_eq!(cov.nrows(), dim);
        if let Some(chol) = Cholesky::new(cov.clone()) {
            let l = chol.l();
            let log_det = 2.0 * l.diagonal().iter().map(|d| d.ln()).sum::<f64>();
            if log_det.is_finite() {
                return GaussianFactor {
                    mean,
                    factor: l,
                    chol: Some(chol),
                    eigen: None,
                    log_det,
                    dim,
                };
            }
        }
        // PSD fallback
        let se = cov.symmetric_eigen();
        let clamped = se.eigenvalues.map(|v| v.max(0.0));
        let mut factor = se.eigenvectors.clone();
        for j in 0..dim {
            let s = clamped[j].sqrt();
            for i in 0..dim {
                factor[(i, j)] *= s;
            }
        }
        let log_det = clamped.iter().filter(|&&v| v > 0.0).map(|v| v.ln()).sum::<f64>();
        GaussianFactor {
            mean,
            factor,
            chol: None,
            eigen: Some((se.eigenvectors, clamped)),
            log_det,
            dim,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Log (pseudo-)determinant of the covariance.
    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// Rank of the covariance factor.
    pub fn rank(&self) -> usize {
        match &self.eigen {
            Some((_, vals)) => vals.iter().filter(|&&v| v > 0.0).count(),
            None => self.dim,
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> DVector<f64> {
        let z = DVector::from_fn(self.dim, |_, _| StandardNormal.sample(rng));
        &self.mean + &self.factor * z
    }

    /// Squared Mahalanobis distance `(x - mean)^T cov^{-1} (x - mean)`
    /// (pseudo-inverse on the rank-deficient path).
    pub fn mahalanobis_sq(&self, x: &DVector<f64>) -> f64 {
        let r = x - &self.mean;
        if let Some(chol) = &self.chol {
            let w = chol.solve(&r);
            r.dot(&w)
        } else {
            let (vecs, vals) = self.eigen.as_ref().unwrap();
            let proj = vecs.transpose() * r;
            proj.iter()
                .zip(vals.iter())
                .filter(|(_, &v)| v > 0.0)
                .map(|(p, &v)| p * p / v)
                .sum()
        }
    }

    /// Log density at `x` (log pseudo-density for singular covariances).
    pub fn log_density(&self, x: &DVector<f64>) -> f64 {
        -0.5 * (self.rank() as f64 * (2.0 * std::f64::consts::PI).ln() + self.log_det
            + self.mahalanobis_sq(x))
    }
}
