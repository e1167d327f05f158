//! DC-kernel Gaussian prior, marginal likelihood, Empirical Bayes
//! hyperparameter estimation and the closed-form conditional posterior.
//!
//! The impulse response is modeled as a zero-mean Gaussian vector with
//! covariance `K(k,j) = c rho^|k-j| lambda^((k+j)/2)` (1-indexed taps).
//! With `Sigma_y = Phi K Phi^T + sigma^2 I`, the marginal likelihood and the
//! posterior are Gaussian; everything is evaluated through an n x n reduced
//! factorization (`K = L L^T`, `M = I + L^T Phi^T Phi L / sigma^2`) so the
//! per-evaluation cost does not grow with the data length. Dense T x T forms
//! are kept as a fallback and as an independent cross-check route.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::chi2::chi2_quantile;
use crate::confidence::{ConfidenceSet, GaussianFactor};
use crate::error::SysidError;
use crate::system::{Dataset, ImpulseResponse, RegressorMatrix};

/// DC-kernel hyperparameters: scale `c >= 0`, tap correlation `|rho| <= 1`,
/// decay `0 <= lambda <= 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyperparams {
    pub c: f64,
    pub rho: f64,
    pub lambda: f64,
}

impl Hyperparams {
    pub fn new(c: f64, rho: f64, lambda: f64) -> Self {
        let eta = Hyperparams { c, rho, lambda };
        assert!(eta.in_box(), "hyperparameters outside the admissible box");
        eta
    }

    pub fn in_box(&self) -> bool {
        self.c >= 0.0 && self.rho.abs() <= 1.0 && (0.0..=1.0).contains(&self.lambda)
    }
}

/// Prior covariance matrix for a length-`n` impulse response.
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    pub k: DMatrix<f64>,
}

/// `K(k,j) = c rho^|k-j| lambda^((k+j)/2)`, 1-indexed.
pub fn dc_kernel(eta: &Hyperparams, n: usize) -> KernelMatrix {
    assert!(eta.in_box());
    let mut k = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let (ki, kj) = (i as f64 + 1.0, j as f64 + 1.0);
            k[(i, j)] = eta.c * eta.rho.powi((i as i32 - j as i32).abs()) * eta.lambda.powf((ki + kj) / 2.0);
        }
    }
    KernelMatrix { k }
}

/// Gaussian posterior of the impulse response for fixed hyperparameters.
#[derive(Debug, Clone)]
pub struct GaussianPosterior {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub eta: Hyperparams,
}

/// Sufficient statistics of a dataset for repeated marginal-likelihood and
/// posterior evaluations: only `Phi^T Phi`, `Phi^T Y` and `Y^T Y` are needed.
#[derive(Debug, Clone)]
pub struct MarginalContext {
    gram: DMatrix<f64>,
    phity: DVector<f64>,
    yty: f64,
    t_len: usize,
    n: usize,
    pub sigma2: f64,
}

impl MarginalContext {
    pub fn new(y: &[f64], phi: &RegressorMatrix, sigma2: f64) -> Self {
        assert!(sigma2 > 0.0);
        let yv = DVector::from_column_slice(y);
        MarginalContext {
            gram: phi.phi.transpose() * &phi.phi,
            phity: phi.phi.transpose() * yv,
            yty: y.iter().map(|v| v * v).sum(),
            t_len: y.len(),
            n: phi.phi.ncols(),
            sigma2,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn t_len(&self) -> usize {
        self.t_len
    }

    /// `ln p(Y | eta)` through the reduced n x n factorization.
    pub fn log_marginal(&self, eta: &Hyperparams) -> Result<f64, SysidError> {
        let ln2pi = (2.0 * std::f64::consts::PI).ln();
        let t = self.t_len as f64;
        if eta.c == 0.0 {
            return Ok(-0.5 * (t * ln2pi + t * self.sigma2.ln() + self.yty / self.sigma2));
        }
        let l = chol_kernel(eta, self.n)?;
        let m = m_matrix(&l, &self.gram, self.sigma2);
        let mc = Cholesky::new(m).ok_or(SysidError::NonPositiveDefinite)?;
        let log_det_m: f64 = 2.0 * mc.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let v = l.transpose() * &self.phity;
        let w = mc.solve(&v);
        let quad = self.yty / self.sigma2 - v.dot(&w) / (self.sigma2 * self.sigma2);
        let log_det = t * self.sigma2.ln() + log_det_m;
        Ok(-0.5 * (t * ln2pi + log_det + quad))
    }

    /// Posterior mean/covariance factorization for fixed `eta`.
    pub fn posterior_factor(&self, eta: &Hyperparams) -> Result<PosteriorFactor, SysidError> {
        if eta.c == 0.0 {
            let zero_l = DMatrix::zeros(self.n, self.n);
            return Ok(PosteriorFactor {
                mean: DVector::zeros(self.n),
                l: zero_l.clone(),
                c_chol: DMatrix::identity(self.n, self.n),
                log_det_cov: f64::NEG_INFINITY,
                eta: *eta,
                degenerate: true,
            });
        }
        let l = chol_kernel(eta, self.n)?;
        let m = m_matrix(&l, &self.gram, self.sigma2);
        let mc = Cholesky::new(m).ok_or(SysidError::NonPositiveDefinite)?;
        let v = l.transpose() * &self.phity;
        let mean = &l * mc.solve(&v) / self.sigma2;
        let c_l = mc.l();
        let log_det_cov = 2.0
            * (l.diagonal().iter().map(|d| d.ln()).sum::<f64>()
                - c_l.diagonal().iter().map(|d| d.ln()).sum::<f64>());
        Ok(PosteriorFactor {
            mean,
            l,
            c_chol: c_l,
            log_det_cov,
            eta: *eta,
            degenerate: false,
        })
    }
}

/// Cholesky factor of the DC kernel, with one jittered retry
/// (`1e-10 * trace/n` on the diagonal) before giving up.
fn chol_kernel(eta: &Hyperparams, n: usize) -> Result<DMatrix<f64>, SysidError> {
    let k = dc_kernel(eta, n).k;
    if let Some(ch) = Cholesky::new(k.clone()) {
        return Ok(ch.l());
    }
    let jitter = 1e-10 * k.trace() / n as f64;
    let jittered = k + DMatrix::identity(n, n) * jitter;
    Cholesky::new(jittered)
        .map(|ch| ch.l())
        .ok_or(SysidError::NonPositiveDefinite)
}

fn m_matrix(l: &DMatrix<f64>, gram: &DMatrix<f64>, sigma2: f64) -> DMatrix<f64> {
    let n = l.nrows();
    let lt_g_l = l.transpose() * gram * l;
    DMatrix::identity(n, n) + lt_g_l / sigma2
}

/// Posterior `N(mean, Sigma)` with `Sigma = L C^-T C^-1 L^T` held in factored
/// form; supports cheap sampling and batched log-density evaluation.
#[derive(Debug, Clone)]
pub struct PosteriorFactor {
    pub mean: DVector<f64>,
    l: DMatrix<f64>,
    c_chol: DMatrix<f64>,
    pub log_det_cov: f64,
    pub eta: Hyperparams,
    degenerate: bool,
}

impl PosteriorFactor {
    pub fn n(&self) -> usize {
        self.mean.len()
    }

    /// Materialize the covariance `Sigma = (L C^-T)(L C^-T)^T`.
    pub fn covariance(&self) -> DMatrix<f64> {
        if self.degenerate {
            return DMatrix::zeros(self.n(), self.n());
        }
        let b = self.b_factor();
        &b * b.transpose()
    }

    /// `B` with `Sigma = B B^T`.
    fn b_factor(&self) -> DMatrix<f64> {
        let bt = self
            .c_chol
            .solve_lower_triangular(&self.l.transpose())
            .expect("triangular solve");
        bt.transpose()
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> DVector<f64> {
        if self.degenerate {
            return self.mean.clone();
        }
        let n = self.n();
        let z = DVector::from_fn(n, |_, _| StandardNormal.sample(rng));
        let w = self
            .c_chol
            .transpose()
            .solve_upper_triangular(&z)
            .expect("triangular solve");
        &self.mean + &self.l * w
    }

    /// Log densities of the columns of `xs` under this posterior.
    pub fn log_density_block(&self, xs: &DMatrix<f64>) -> DVector<f64> {
        let n = self.n() as f64;
        let m = xs.ncols();
        if self.degenerate {
            return DVector::from_element(m, f64::NEG_INFINITY);
        }
        let mut r = xs.clone();
        for j in 0..m {
            let mut col = r.column_mut(j);
            col -= &self.mean;
        }
        // quad_j = || C^T L^-1 r_j ||^2
        let w = self.l.solve_lower_triangular(&r).expect("triangular solve");
        let q = self.c_chol.transpose() * w;
        let ln2pi = (2.0 * std::f64::consts::PI).ln();
        DVector::from_fn(m, |j, _| {
            let quad: f64 = q.column(j).iter().map(|v| v * v).sum();
            -0.5 * (n * ln2pi + self.log_det_cov + quad)
        })
    }

    pub fn into_posterior(self) -> GaussianPosterior {
        let cov = self.covariance();
        GaussianPosterior { mean: self.mean, cov, eta: self.eta }
    }
}

/// `ln p(Y | eta)` computed via the reduced factorization.
pub fn log_marginal_likelihood(
    eta: &Hyperparams,
    y: &[f64],
    phi: &RegressorMatrix,
    sigma2: f64,
) -> Result<f64, SysidError> {
    MarginalContext::new(y, phi, sigma2).log_marginal(eta)
}

/// Direct T x T evaluation of `ln p(Y | eta)`; the independent route used to
/// cross-check the reduced form.
pub fn log_marginal_likelihood_dense(
    eta: &Hyperparams,
    y: &[f64],
    phi: &RegressorMatrix,
    sigma2: f64,
) -> Result<f64, SysidError> {
    let t_len = y.len();
    let k = dc_kernel(eta, phi.phi.ncols()).k;
    let sigma_y =
        &phi.phi * k * phi.phi.transpose() + DMatrix::identity(t_len, t_len) * sigma2;
    let ch = Cholesky::new(sigma_y).ok_or(SysidError::NonPositiveDefinite)?;
    let log_det: f64 = 2.0 * ch.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let yv = DVector::from_column_slice(y);
    let quad = yv.dot(&ch.solve(&yv));
    let t = t_len as f64;
    Ok(-0.5 * (t * (2.0 * std::f64::consts::PI).ln() + log_det + quad))
}

/// Posterior mean and covariance for fixed hyperparameters (reduced n x n
/// form, falling back to the dense T x T form when the kernel cannot be
/// factored).
pub fn posterior(
    eta: &Hyperparams,
    y: &[f64],
    phi: &RegressorMatrix,
    sigma2: f64,
) -> Result<GaussianPosterior, SysidError> {
    let ctx = MarginalContext::new(y, phi, sigma2);
    match ctx.posterior_factor(eta) {
        Ok(f) => Ok(f.into_posterior()),
        Err(SysidError::NonPositiveDefinite) => posterior_dense(eta, y, phi, sigma2),
        Err(e) => Err(e),
    }
}

/// Dense T x T posterior evaluation (also the cross-check route for the
/// reduced form).
pub fn posterior_dense(
    eta: &Hyperparams,
    y: &[f64],
    phi: &RegressorMatrix,
    sigma2: f64,
) -> Result<GaussianPosterior, SysidError> {
    let t_len = y.len();
    let k = dc_kernel(eta, phi.phi.ncols()).k;
    let kpt = &k * phi.phi.transpose();
    let sigma_y = &phi.phi * &kpt + DMatrix::identity(t_len, t_len) * sigma2;
    let ch = Cholesky::new(sigma_y).ok_or(SysidError::NonPositiveDefinite)?;
    let yv = DVector::from_column_slice(y);
    let mean = &kpt * ch.solve(&yv);
    let cov = &k - &kpt * ch.solve(&kpt.transpose());
    Ok(GaussianPosterior { mean, cov, eta: *eta })
}

/// Local maximizer of the marginal likelihood over the hyperparameter box.
///
/// Nelder-Mead in the unconstrained coordinates
/// `(ln c, atanh rho, logit lambda)`, multi-started from `init` plus the four
/// points `{c=1} x {rho=+-0.5} x {lambda in {0.8, 0.95}}`.
pub fn maximize_marginal_likelihood(
    y: &[f64],
    phi: &RegressorMatrix,
    sigma2: f64,
    init: &Hyperparams,
) -> Hyperparams {
    let ctx = MarginalContext::new(y, phi, sigma2);
    maximize_marginal_context(&ctx, init)
}

pub fn maximize_marginal_context(ctx: &MarginalContext, init: &Hyperparams) -> Hyperparams {
    let mut starts = vec![*init];
    for rho in [0.5, -0.5] {
        for lambda in [0.8, 0.95] {
            starts.push(Hyperparams { c: 1.0, rho, lambda });
        }
    }
    let objective = |x: &[f64]| -> f64 {
        let eta = from_unconstrained(x);
        match ctx.log_marginal(&eta) {
            Ok(v) if v.is_finite() => -v,
            _ => f64::INFINITY,
        }
    };
    let mut best: Option<(f64, Hyperparams)> = None;
    for start in &starts {
        let x0 = to_unconstrained(start);
        let (x, f) = nelder_mead(&objective, &x0, 0.5, 1e-8, 400);
        let eta = from_unconstrained(&x);
        if best.as_ref().is_none_or(|(bf, _)| f < *bf) {
            best = Some((f, eta));
        }
    }
    best.map(|(_, eta)| eta).unwrap_or(*init)
}

fn to_unconstrained(eta: &Hyperparams) -> [f64; 3] {
    let clamp = |v: f64| v.clamp(-0.999_999, 0.999_999);
    [
        eta.c.max(1e-12).ln(),
        clamp(eta.rho).atanh(),
        logit(eta.lambda.clamp(1e-6, 1.0 - 1e-6)),
    ]
}

fn from_unconstrained(x: &[f64]) -> Hyperparams {
    Hyperparams {
        c: x[0].min(50.0).exp(),
        rho: x[1].tanh(),
        lambda: sigmoid(x[2]),
    }
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Standard Nelder-Mead simplex minimization; returns the best vertex and
/// its objective value.
fn nelder_mead<F: Fn(&[f64]) -> f64>(
    f: &F,
    x0: &[f64],
    step: f64,
    tol: f64,
    max_iter: usize,
) -> (Vec<f64>, f64) {
    let d = x0.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(d + 1);
    simplex.push((x0.to_vec(), f(x0)));
    for i in 0..d {
        let mut x = x0.to_vec();
        x[i] += step;
        let fx = f(&x);
        simplex.push((x, fx));
    }
    let order = |s: &mut Vec<(Vec<f64>, f64)>| {
        s.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal))
    };
    order(&mut simplex);
    for _ in 0..max_iter {
        if simplex[d].1 - simplex[0].1 < tol
            && simplex[d].1.is_finite()
        {
            break;
        }
        let centroid: Vec<f64> = (0..d)
            .map(|j| simplex[..d].iter().map(|(x, _)| x[j]).sum::<f64>() / d as f64)
            .collect();
        let worst = simplex[d].clone();
        let lerp = |t: f64| -> Vec<f64> {
            (0..d).map(|j| centroid[j] + t * (worst.0[j] - centroid[j])).collect()
        };
        let xr = lerp(-1.0);
        let fr = f(&xr);
        if fr < simplex[0].1 {
            let xe = lerp(-2.0);
            let fe = f(&xe);
            simplex[d] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[d - 1].1 {
            simplex[d] = (xr, fr);
        } else {
            let xc = if fr < worst.1 { lerp(-0.5) } else { lerp(0.5) };
            let fc = f(&xc);
            if fc < worst.1.min(fr) {
                simplex[d] = (xc, fc);
            } else {
                // shrink toward the best vertex
                let best = simplex[0].0.clone();
                for v in simplex.iter_mut().skip(1) {
                    for (vj, bj) in v.0.iter_mut().zip(best.iter()) {
                        *vj = bj + 0.5 * (*vj - bj);
                    }
                    v.1 = f(&v.0);
                }
            }
        }
        order(&mut simplex);
    }
    let (x, fx) = simplex.swap_remove(0);
    (x, fx)
}

/// Empirical Bayes estimate: maximize the marginal likelihood, then return
/// the posterior mean at the maximizer together with the posterior and the
/// tuned hyperparameters.
pub fn eb_estimate(
    data: &Dataset,
    n: usize,
    sigma2: f64,
) -> Result<(ImpulseResponse, GaussianPosterior, Hyperparams), SysidError> {
    let phi = crate::system::build_regressor(&data.u, n);
    let ctx = MarginalContext::new(&data.y, &phi, sigma2);
    let init = Hyperparams { c: 1.0, rho: 0.0, lambda: 0.9 };
    let eta = maximize_marginal_context(&ctx, &init);
    let post = ctx.posterior_factor(&eta)?.into_posterior();
    let h = ImpulseResponse { taps: post.mean.iter().copied().collect() };
    Ok((h, post, eta))
}

/// Sampled ellipsoidal confidence set: draw from the posterior and retain the
/// samples inside the chi-square `alpha`-level ellipsoid. Retention by
/// ellipsoid membership is equivalent to thresholding the Gaussian density,
/// so members form a highest-density set.
pub fn eb_confidence_set<R: Rng>(
    post: &GaussianPosterior,
    n_samples: usize,
    alpha: f64,
    rng: &mut R,
) -> ConfidenceSet {
    assert!(alpha > 0.0 && alpha < 1.0);
    let n = post.mean.len();
    let factor = GaussianFactor::new(post.mean.clone(), post.cov.clone());
    let chi2 = chi2_quantile(alpha, n);
    let ln2pi = (2.0 * std::f64::consts::PI).ln();
    let threshold = -0.5 * (factor.rank() as f64 * ln2pi + factor.log_det() + chi2);
    let mut members = Vec::new();
    let mut scores = Vec::new();
    for _ in 0..n_samples {
        let x = factor.sample(rng);
        if factor.mahalanobis_sq(&x) <= chi2 {
            scores.push(factor.log_density(&x));
            members.push(ImpulseResponse { taps: x.iter().copied().collect() });
        }
    }
    ConfidenceSet { members, scores, alpha, threshold }
}
