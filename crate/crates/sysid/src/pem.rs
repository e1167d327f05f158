//! Prediction-error estimation of output-error models.
//!
//! The model class is `y(t) = B(q^-1)/F(q^-1) u(t) + e(t)` with
//! `B = b_1 q^-1 + ... + b_nb q^-nb` and `F = 1 + f_1 q^-1 + ... + f_nf q^-nf`.
//! The one-step predictor of an output-error model is the noiseless
//! simulated output, so the PEM cost is the mean squared simulation error.
//! Fitting uses Levenberg-Marquardt with the analytic predictor gradient and
//! a multi-start (ARX-based plus randomized initializations) to soften the
//! local-minimum problem. On top of the point fit the module provides BIC
//! and oracle order selection, the asymptotic parameter covariance and two
//! sampled confidence sets for the impulse response: one from the truncated
//! asymptotic Gaussian, one from an MCMC run on the likelihood.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::confidence::{retain_top_fraction, ConfidenceSet, GaussianFactor};
use crate::error::SysidError;
use crate::mcmc::run_am_thinned;
use crate::metrics::impulse_fit;
use crate::poly;
use crate::system::{build_regressor, impulse_response, sample_disk_roots, Dataset, DiscreteSystem, ImpulseResponse};

/// Output-error model parameters: numerator coefficients `b` (lags
/// `1..=nb`) and the monic denominator tail `f` (lags `1..=nf`).
#[derive(Debug, Clone, PartialEq)]
pub struct OeParams {
    pub b: Vec<f64>,
    pub f: Vec<f64>,
}

impl OeParams {
    pub fn nb(&self) -> usize {
        self.b.len()
    }

    pub fn nf(&self) -> usize {
        self.f.len()
    }

    pub fn dim(&self) -> usize {
        self.b.len() + self.f.len()
    }

    pub fn to_system(&self) -> DiscreteSystem {
        let mut num = Vec::with_capacity(self.b.len() + 1);
        num.push(0.0);
        num.extend_from_slice(&self.b);
        let mut den = Vec::with_capacity(self.f.len() + 1);
        den.push(1.0);
        den.extend_from_slice(&self.f);
        DiscreteSystem::new(num, den)
    }

    /// Stability of `1/F`.
    pub fn is_stable(&self) -> bool {
        let mut den = vec![1.0];
        den.extend_from_slice(&self.f);
        poly::is_schur_stable(&den)
    }

    pub fn impulse_response(&self, n: usize) -> ImpulseResponse {
        impulse_response(&self.to_system(), n)
    }

    pub fn to_vec(&self) -> DVector<f64> {
        let mut v = Vec::with_capacity(self.dim());
        v.extend_from_slice(&self.b);
        v.extend_from_slice(&self.f);
        DVector::from_vec(v)
    }

    pub fn from_vec(x: &DVector<f64>, nb: usize, nf: usize) -> Self {
        assert_eq!(x.len(), nb + nf);
        OeParams {
            b: x.as_slice()[..nb].to_vec(),
            f: x.as_slice()[nb..].to_vec(),
        }
    }
}

/// Result of a PEM fit; `sigma2_hat` is the cost at the optimum, which is
/// the residual-variance estimate used by the asymptotic covariance.
#[derive(Debug, Clone)]
pub struct PemFit {
    pub theta: OeParams,
    pub cost: f64,
    pub sigma2_hat: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Approximate asymptotic covariance of the parameter estimate (the
/// estimator itself is distributed as `N(theta_hat, sigma_theta / T)`).
#[derive(Debug, Clone)]
pub struct AsymptoticCovariance {
    pub sigma_theta: DMatrix<f64>,
}

/// One-step-ahead predictor of the output-error model: the noiseless
/// simulated output `B/F u`, zero initial conditions.
pub fn predict_oe(theta: &OeParams, u: &[f64]) -> Vec<f64> {
    theta.to_system().simulate(u)
}

/// Mean squared prediction error `J(theta)`.
pub fn pem_cost(theta: &OeParams, data: &Dataset) -> f64 {
    let yhat = predict_oe(theta, &data.u);
    let t_len = data.len();
    let sse: f64 = data
        .y
        .iter()
        .zip(&yhat)
        .map(|(y, p)| (y - p) * (y - p))
        .sum();
    if sse.is_finite() {
        sse / t_len as f64
    } else {
        f64::INFINITY
    }
}

/// All-pole filter `1/F`: `y(t) = x(t) - sum_j f_j y(t-j)`.
fn ar_filter(f: &[f64], x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; x.len()];
    for t in 0..x.len() {
        let mut acc = x[t];
        for (j, fj) in f.iter().enumerate() {
            if t > j {
                acc -= fj * y[t - j - 1];
            }
        }
        y[t] = acc;
    }
    y
}

/// Predictor gradient `psi(t) = d yhat(t) / d theta`, `T x (nb+nf)`.
///
/// Column `k < nb` is `(1/F) u` delayed by `k+1` samples; column `nb + j`
/// is `-(1/F) yhat` delayed by `j+1` samples. Shifting commutes with the
/// zero-initial-condition filter, so each family needs a single filter pass.
pub fn gradient_psi(theta: &OeParams, u: &[f64]) -> DMatrix<f64> {
    let t_len = u.len();
    let d = theta.dim();
    let mut psi = DMatrix::<f64>::zeros(t_len, d);
    if t_len == 0 {
        return psi;
    }
    let fu = ar_filter(&theta.f, u);
    for k in 0..theta.nb() {
        for t in (k + 1)..t_len {
            psi[(t, k)] = fu[t - k - 1];
        }
    }
    if theta.nf() > 0 {
        let yhat = predict_oe(theta, u);
        let fy = ar_filter(&theta.f, &yhat);
        for j in 0..theta.nf() {
            for t in (j + 1)..t_len {
                psi[(t, theta.nb() + j)] = -fy[t - j - 1];
            }
        }
    }
    psi
}

const LM_MAX_ITER: usize = 200;
const LM_COST_TOL: f64 = 1e-10;
const LM_GRAD_TOL: f64 = 1e-8;

/// Damped Gauss-Newton (Levenberg-Marquardt) descent from one starting
/// point.
fn lm_fit(data: &Dataset, init: OeParams) -> PemFit {
    let t_len = data.len() as f64;
    let (nb, nf) = (init.nb(), init.nf());
    let mut theta = init;
    let mut cost = pem_cost(&theta, data);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    if !cost.is_finite() {
        return PemFit { sigma2_hat: cost, theta, cost, converged: false, iterations: 0 };
    }
    for iter in 0..LM_MAX_ITER {
        iterations = iter + 1;
        let psi = gradient_psi(&theta, &data.u);
        let yhat = predict_oe(&theta, &data.u);
        let r = DVector::from_iterator(
            data.len(),
            data.y.iter().zip(&yhat).map(|(y, p)| y - p),
        );
        let g = psi.transpose() * &r;
        if (g.amax() * 2.0 / t_len) < LM_GRAD_TOL {
            converged = true;
            break;
        }
        let a = psi.transpose() * &psi;
        let mut improved = false;
        for _ in 0..20 {
            let mut damped = a.clone();
            for i in 0..damped.nrows() {
                damped[(i, i)] += lambda * a[(i, i)].max(1e-10);
            }
            let step = match Cholesky::new(damped) {
                Some(ch) => ch.solve(&g),
                None => break,
            };
            let candidate = OeParams::from_vec(&(theta.to_vec() + step), nb, nf);
            let new_cost = pem_cost(&candidate, data);
            if new_cost.is_finite() && new_cost < cost {
                let rel_drop = (cost - new_cost) / cost.max(1e-300);
                theta = candidate;
                cost = new_cost;
                lambda = (lambda / 10.0).max(1e-12);
                improved = true;
                if rel_drop < LM_COST_TOL {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
            if lambda > 1e12 {
                break;
            }
        }
        if !improved {
            converged = converged || lambda > 1e12;
            break;
        }
        if converged {
            break;
        }
    }
    PemFit { sigma2_hat: cost, theta, cost, converged, iterations }
}

/// Least-squares ARX fit used as a deterministic starting point; the
/// denominator is reflected into the stability region if needed.
fn arx_init(data: &Dataset, nb: usize, nf: usize) -> OeParams {
    let t_len = data.len();
    let d = nb + nf;
    let mut x = DMatrix::<f64>::zeros(t_len, d);
    for t in 0..t_len {
        for k in 0..nb {
            if t > k {
                x[(t, k)] = data.u[t - k - 1];
            }
        }
        for j in 0..nf {
            if t > j {
                x[(t, nb + j)] = -data.y[t - j - 1];
            }
        }
    }
    let yv = DVector::from_column_slice(&data.y);
    let mut gram = x.transpose() * &x;
    let ridge = 1e-8 * gram.trace().max(1e-12) / d as f64;
    for i in 0..d {
        gram[(i, i)] += ridge;
    }
    let coeffs = Cholesky::new(gram)
        .map(|ch| ch.solve(&(x.transpose() * yv)))
        .unwrap_or_else(|| DVector::zeros(d));
    let b = coeffs.as_slice()[..nb].to_vec();
    let f_raw = coeffs.as_slice()[nb..].to_vec();
    let mut den = vec![1.0];
    den.extend_from_slice(&f_raw);
    let den = poly::stabilize(&den);
    OeParams { b, f: den[1..].to_vec() }
}

/// Iterative prefiltered least squares (Steiglitz-McBride style): filter
/// `u` and `y` through `1/F` of the current iterate and refit the ARX
/// normal equations on the filtered signals. Converges to an output-error
/// fit for well-behaved data and makes a much better descent start than
/// plain ARX, especially at high orders.
fn sm_init(data: &Dataset, nb: usize, nf: usize, rounds: usize) -> OeParams {
    let mut theta = arx_init(data, nb, nf);
    let t_len = data.len();
    let d = nb + nf;
    for _ in 0..rounds {
        let uf = ar_filter(&theta.f, &data.u);
        let yf = ar_filter(&theta.f, &data.y);
        let mut x = DMatrix::<f64>::zeros(t_len, d);
        for t in 0..t_len {
            for k in 0..nb {
                if t > k {
                    x[(t, k)] = uf[t - k - 1];
                }
            }
            for j in 0..nf {
                if t > j {
                    x[(t, nb + j)] = -yf[t - j - 1];
                }
            }
        }
        let yv = DVector::from_column_slice(&yf);
        let mut gram = x.transpose() * &x;
        let ridge = 1e-8 * gram.trace().max(1e-12) / d as f64;
        for i in 0..d {
            gram[(i, i)] += ridge;
        }
        let Some(ch) = Cholesky::new(gram) else { break };
        let coeffs = ch.solve(&(x.transpose() * yv));
        if !coeffs.iter().all(|v| v.is_finite()) {
            break;
        }
        let mut den = vec![1.0];
        den.extend_from_slice(&coeffs.as_slice()[nb..]);
        let den = poly::stabilize(&den);
        theta = OeParams {
            b: coeffs.as_slice()[..nb].to_vec(),
            f: den[1..].to_vec(),
        };
    }
    theta
}

fn random_init<R: Rng>(nb: usize, nf: usize, rng: &mut R) -> OeParams {
    let poles = sample_disk_roots(nf, 0.9, rng);
    let den = poly::poly_from_roots(&poles);
    let b: Vec<f64> = (0..nb)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            0.5 * z
        })
        .collect();
    OeParams { b, f: den[1..].to_vec() }
}

/// PEM point estimate by multi-start Levenberg-Marquardt: an ARX-based
/// initialization, the caller's initialization when given, and five
/// randomized ones. Returns the lowest-cost result with stable `F`,
/// falling back to the lowest-cost result overall if no start ends stable.
pub fn fit_oe<R: Rng>(
    data: &Dataset,
    nb: usize,
    nf: usize,
    init: Option<OeParams>,
    rng: &mut R,
) -> PemFit {
    assert!(nb >= 1);
    assert!(data.len() > nb + nf, "need more samples than parameters");
    let extra: Vec<OeParams> = init.into_iter().collect();
    fit_oe_with_starts(data, nb, nf, extra, rng)
}

/// Like [`fit_oe`], with an arbitrary number of caller-provided warm starts
/// joined to the standard multistart pool.
pub fn fit_oe_with_starts<R: Rng>(
    data: &Dataset,
    nb: usize,
    nf: usize,
    extra: Vec<OeParams>,
    rng: &mut R,
) -> PemFit {
    assert!(nb >= 1);
    assert!(data.len() > nb + nf, "need more samples than parameters");
    let mut starts = vec![arx_init(data, nb, nf)];
    if nf > 0 {
        starts.push(sm_init(data, nb, nf, 10));
    }
    for theta in extra {
        assert_eq!(theta.nb(), nb);
        assert_eq!(theta.nf(), nf);
        starts.push(theta);
    }
    for _ in 0..5 {
        starts.push(random_init(nb, nf, rng));
    }
    let mut best_stable: Option<PemFit> = None;
    let mut best_any: Option<PemFit> = None;
    for start in starts {
        let fit = lm_fit(data, start);
        if !fit.cost.is_finite() {
            continue;
        }
        if fit.theta.is_stable()
            && best_stable.as_ref().is_none_or(|b| fit.cost < b.cost)
        {
            best_stable = Some(fit.clone());
        }
        if best_any.as_ref().is_none_or(|b| fit.cost < b.cost) {
            best_any = Some(fit);
        }
    }
    best_stable
        .or(best_any)
        .expect("at least one start yields a finite cost")
}

/// `Sigma_theta = J(theta_hat) * [ (1/T) sum psi psi^T ]^-1`, with a small
/// ridge added when the sample information matrix is badly conditioned.
pub fn asymptotic_covariance(
    fit: &PemFit,
    data: &Dataset,
) -> Result<AsymptoticCovariance, SysidError> {
    let psi = gradient_psi(&fit.theta, &data.u);
    let t_len = data.len() as f64;
    let d = fit.theta.dim();
    let mut info = psi.transpose() * &psi / t_len;
    let eigs = info.clone().symmetric_eigen().eigenvalues;
    let max_eig = eigs.max();
    let min_eig = eigs.min();
    if !(max_eig.is_finite() && max_eig > 0.0) {
        return Err(SysidError::SingularInformation);
    }
    if min_eig <= 0.0 || max_eig / min_eig > 1e12 {
        let ridge = 1e-10 * info.trace() / d as f64;
        for i in 0..d {
            info[(i, i)] += ridge;
        }
    }
    let inv = Cholesky::new(info)
        .map(|ch| ch.inverse())
        .ok_or(SysidError::SingularInformation)?;
    let mut sigma = inv * fit.cost;
    // enforce exact symmetry against accumulated rounding
    let sym = (&sigma + sigma.transpose()) / 2.0;
    sigma = sym;
    Ok(AsymptoticCovariance { sigma_theta: sigma })
}

/// BIC score `T ln J + d ln T` of a fit.
pub fn bic_value(fit: &PemFit, t_len: usize) -> f64 {
    let t = t_len as f64;
    t * fit.cost.max(1e-300).ln() + fit.theta.dim() as f64 * t.ln()
}

/// Fit `nb = nf = k` for every order `k` in the range; failed fits are
/// dropped.
pub fn fit_order_sweep<R: Rng>(
    data: &Dataset,
    orders: impl IntoIterator<Item = usize>,
    rng: &mut R,
) -> Vec<(usize, PemFit)> {
    let mut out: Vec<(usize, PemFit)> = Vec::new();
    for k in orders {
        if data.len() <= 2 * k {
            continue;
        }
        let mut extra: Vec<OeParams> = Vec::new();
        // warm start from the previous order, padded with zero coefficients
        if let Some((pk, prev)) = out.last() {
            if *pk < k {
                let mut theta = prev.theta.clone();
                theta.b.resize(k, 0.0);
                theta.f.resize(k, 0.0);
                extra.push(theta);
            }
        }
        // greedy modal expansion: take the fit two orders down, model its
        // residual with a second-order section and connect the two in
        // parallel, so each order step can pick up one more resonance
        // instead of rediscovering the whole model
        if k >= 4 {
            if let Some((_, prev2)) = out.iter().rev().find(|(pk, _)| pk + 2 == k) {
                let yhat = predict_oe(&prev2.theta, &data.u);
                let resid: Vec<f64> =
                    data.y.iter().zip(&yhat).map(|(y, yh)| y - yh).collect();
                let rdata = Dataset {
                    u: data.u.clone(),
                    y: resid,
                    sigma2: data.sigma2,
                    seed: data.seed,
                };
                let section = fit_oe(&rdata, 2, 2, None, rng);
                if section.cost.is_finite() {
                    extra.push(parallel_combine(&prev2.theta, &section.theta));
                }
            }
        }
        let fit = fit_oe_with_starts(data, k, k, extra, rng);
        if fit.cost.is_finite() {
            out.push((k, fit));
        }
    }
    out
}

/// Parallel connection `Ba/Fa + Bb/Fb = (Ba Fb + Bb Fa) / (Fa Fb)` of two
/// strictly proper output-error models.
fn parallel_combine(a: &OeParams, b: &OeParams) -> OeParams {
    // full polynomials in q^-1: numerators start at q^-1, denominators monic
    let mut ba = vec![0.0];
    ba.extend_from_slice(&a.b);
    let mut bb = vec![0.0];
    bb.extend_from_slice(&b.b);
    let mut fa = vec![1.0];
    fa.extend_from_slice(&a.f);
    let mut fb = vec![1.0];
    fb.extend_from_slice(&b.f);
    let mut num = poly::mul(&ba, &fb);
    let other = poly::mul(&bb, &fa);
    num.resize(other.len().max(num.len()), 0.0);
    for (i, v) in other.iter().enumerate() {
        num[i] += v;
    }
    let den = poly::mul(&fa, &fb);
    let order = den.len() - 1;
    let mut bt = num[1..].to_vec();
    bt.resize(order, 0.0);
    OeParams { b: bt, f: den[1..].to_vec() }
}

/// Order selection by BIC over `nb = nf = k`, `k` in `orders`.
pub fn select_order_bic<R: Rng>(
    data: &Dataset,
    orders: impl IntoIterator<Item = usize>,
    rng: &mut R,
) -> Result<PemFit, SysidError> {
    let sweep = fit_order_sweep(data, orders, rng);
    select_bic_from_sweep(sweep, data.len())
}

pub fn select_bic_from_sweep(
    sweep: Vec<(usize, PemFit)>,
    t_len: usize,
) -> Result<PemFit, SysidError> {
    sweep
        .into_iter()
        .min_by(|(_, a), (_, b)| {
            bic_value(a, t_len)
                .partial_cmp(&bic_value(b, t_len))
                .unwrap_or(std::cmp::Ordering::Equal)
        })
        .map(|(_, fit)| fit)
        .ok_or(SysidError::AllFitsFailed)
}

/// Oracle order selection: the fit whose impulse response best matches the
/// true one (an unrealistic reference estimator).
pub fn select_order_oracle<R: Rng>(
    data: &Dataset,
    orders: impl IntoIterator<Item = usize>,
    true_h: &ImpulseResponse,
    rng: &mut R,
) -> Result<PemFit, SysidError> {
    let sweep = fit_order_sweep(data, orders, rng);
    select_oracle_from_sweep(sweep, true_h)
}

pub fn select_oracle_from_sweep(
    sweep: Vec<(usize, PemFit)>,
    true_h: &ImpulseResponse,
) -> Result<PemFit, SysidError> {
    let n = true_h.len();
    sweep
        .into_iter()
        .filter_map(|(_, fit)| {
            let h = fit.theta.impulse_response(n);
            match impulse_fit(true_h, &h) {
                Ok(v) if v.is_finite() => Some((v, fit)),
                _ => None,
            }
        })
        .max_by(|(a, _), (b, _)| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal))
        .map(|(_, fit)| fit)
        .ok_or(SysidError::AllFitsFailed)
}

/// Maximum rejection attempts per requested sample before the stability
/// truncation is declared starved.
const TRUNCATION_ATTEMPT_FACTOR: usize = 1000;

/// Confidence set sampled from the asymptotic Gaussian
/// `N(theta_hat, Sigma_theta / T)`, truncated to the stability region by
/// rejection, scored by the Gaussian density and thresholded at the
/// `(1-alpha)`-percentile.
pub fn sample_asymptotic_confidence<R: Rng>(
    fit: &PemFit,
    cov: &AsymptoticCovariance,
    t_len: usize,
    n_samples: usize,
    alpha: f64,
    n: usize,
    rng: &mut R,
) -> Result<ConfidenceSet, SysidError> {
    assert!(n_samples >= 1);
    assert!(alpha > 0.0 && alpha < 1.0);
    let (nb, nf) = (fit.theta.nb(), fit.theta.nf());
    let factor = GaussianFactor::new(
        fit.theta.to_vec(),
        &cov.sigma_theta / t_len as f64,
    );
    let max_attempts = TRUNCATION_ATTEMPT_FACTOR * n_samples;
    let mut thetas = Vec::with_capacity(n_samples);
    let mut scores = Vec::with_capacity(n_samples);
    let mut attempts = 0usize;
    while thetas.len() < n_samples {
        if attempts >= max_attempts {
            return Err(SysidError::TruncationStarvation);
        }
        attempts += 1;
        let x = factor.sample(rng);
        let theta = OeParams::from_vec(&x, nb, nf);
        if theta.is_stable() {
            scores.push(factor.log_density(&x));
            thetas.push(theta);
        }
    }
    let members: Vec<ImpulseResponse> =
        thetas.iter().map(|t| t.impulse_response(n)).collect();
    Ok(retain_top_fraction(members, scores, alpha))
}

/// Confidence set sampled from the likelihood
/// `p(Y | theta, sigma2_hat) ~ exp(-T J(theta) / (2 sigma2_hat))` with an
/// adaptive Metropolis chain restricted to the stability region.
#[allow(clippy::too_many_arguments)]
pub fn sample_likelihood_confidence<R: Rng>(
    fit: &PemFit,
    data: &Dataset,
    sigma2_hat: f64,
    burn_in: usize,
    n_samples: usize,
    alpha: f64,
    n: usize,
    rng: &mut R,
) -> Result<ConfidenceSet, SysidError> {
    assert!(sigma2_hat > 0.0);
    let (nb, nf) = (fit.theta.nb(), fit.theta.nf());
    let t = data.len() as f64;
    let log_norm = -(t / 2.0) * (2.0 * std::f64::consts::PI * sigma2_hat).ln();
    let log_target = |x: &DVector<f64>| -> f64 {
        let theta = OeParams::from_vec(x, nb, nf);
        if !theta.is_stable() {
            return f64::NEG_INFINITY;
        }
        let cost = pem_cost(&theta, data);
        if !cost.is_finite() {
            return f64::NEG_INFINITY;
        }
        log_norm - t / (2.0 * sigma2_hat) * cost
    };
    // the chain must start inside the stability region; reflect and shrink
    // the poles of an unstable estimate
    let mut mode_theta = fit.theta.clone();
    if !mode_theta.is_stable() {
        let mut den = vec![1.0];
        den.extend_from_slice(&mode_theta.f);
        den = poly::stabilize(&den);
        for _ in 0..200 {
            if poly::is_schur_stable(&den) {
                break;
            }
            // scale every root towards the origin
            for (i, c) in den.iter_mut().enumerate() {
                *c *= 0.99f64.powi(i as i32);
            }
        }
        assert!(poly::is_schur_stable(&den), "pole shrinking failed");
        mode_theta.f = den[1..].to_vec();
    }
    let mode = mode_theta.to_vec();
    // thin the chain so the kept draws are close to independent; without
    // thinning the envelope of a correlated chain badly understates the
    // likelihood region
    let (chain, _rate) =
        run_am_thinned(&log_target, &mode, burn_in, n_samples, 9, 0.30, rng)?;
    let mut members = Vec::with_capacity(n_samples);
    let mut scores = Vec::with_capacity(n_samples);
    for x in &chain {
        let theta = OeParams::from_vec(x, nb, nf);
        scores.push(log_target(x));
        members.push(theta.impulse_response(n));
    }
    Ok(retain_top_fraction(members, scores, alpha))
}

/// Noise-variance estimate from an unregularized length-`n` FIR
/// least-squares fit: residual sum of squares over `T - n` degrees of
/// freedom (a small ridge is added only if the Gram matrix cannot be
/// factored).
pub fn estimate_noise_variance_ls(data: &Dataset, n: usize) -> f64 {
    assert!(data.len() > n);
    let phi = build_regressor(&data.u, n).phi;
    let yv = DVector::from_column_slice(&data.y);
    let gram = phi.transpose() * &phi;
    let rhs = phi.transpose() * &yv;
    let mut jitter = 0.0;
    let h = loop {
        let mut g = gram.clone();
        if jitter > 0.0 {
            for i in 0..n {
                g[(i, i)] += jitter;
            }
        }
        match Cholesky::new(g) {
            Some(ch) => break ch.solve(&rhs),
            None => {
                jitter = if jitter == 0.0 {
                    1e-10 * gram.trace().max(1e-300) / n as f64
                } else {
                    jitter * 100.0
                };
                assert!(jitter.is_finite(), "regressor Gram matrix unusable");
            }
        }
    };
    let resid = yv - phi * h;
    resid.norm_squared() / (data.len() - n) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{generate_bandlimited_input, simulate_oe};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn white_input(t_len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..t_len).map(|_| StandardNormal.sample(rng)).collect()
    }

    #[test]
    fn predictor_fir_is_shifted_input() {
        let theta = OeParams { b: vec![1.0], f: vec![] };
        let u = vec![3.0, 1.0, -2.0, 0.5];
        let yhat = predict_oe(&theta, &u);
        assert_eq!(yhat, vec![0.0, 3.0, 1.0, -2.0]);
    }

    #[test]
    fn predictor_first_order_recursion() {
        let theta = OeParams { b: vec![1.0], f: vec![-0.5] };
        let u = vec![1.0, 0.0, 0.0, 0.0];
        let yhat = predict_oe(&theta, &u);
        assert_eq!(yhat, vec![0.0, 1.0, 0.5, 0.25]);
    }

    #[test]
    fn predictor_reproduces_noiseless_truth() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let theta = OeParams { b: vec![0.8, -0.2], f: vec![-0.9, 0.5] };
        let u = white_input(100, &mut rng);
        let y = theta.to_system().simulate(&u);
        let yhat = predict_oe(&theta, &u);
        assert_eq!(y, yhat);
    }

    #[test]
    fn cost_examples() {
        let theta = OeParams { b: vec![1.0], f: vec![] };
        let data = Dataset { u: vec![0.0, 0.0], y: vec![1.0, 1.0], sigma2: 1.0, seed: 0 };
        assert_eq!(pem_cost(&theta, &data), 1.0);
        let self_data = Dataset {
            u: vec![1.0, 2.0],
            y: predict_oe(&theta, &[1.0, 2.0]),
            sigma2: 1.0,
            seed: 0,
        };
        assert_eq!(pem_cost(&theta, &self_data), 0.0);
    }

    #[test]
    fn cost_matches_naive_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(62);
        let theta = OeParams { b: vec![0.4, 0.1], f: vec![-0.3] };
        let u = white_input(50, &mut rng);
        let y = white_input(50, &mut rng);
        let data = Dataset { u: u.clone(), y: y.clone(), sigma2: 1.0, seed: 0 };
        let yhat = predict_oe(&theta, &u);
        let mut acc = 0.0;
        for t in 0..50 {
            acc += (y[t] - yhat[t]) * (y[t] - yhat[t]);
        }
        assert!((pem_cost(&theta, &data) - acc / 50.0).abs() < 1e-12);
    }

    #[test]
    fn gradient_fir_columns_are_shifted_input() {
        let theta = OeParams { b: vec![0.3, 0.7], f: vec![] };
        let u = vec![1.0, 2.0, 3.0, 4.0];
        let psi = gradient_psi(&theta, &u);
        assert_eq!(psi[(1, 0)], 1.0);
        assert_eq!(psi[(3, 0)], 3.0);
        assert_eq!(psi[(2, 1)], 1.0);
        assert_eq!(psi[(3, 1)], 2.0);
        assert_eq!(psi[(0, 0)], 0.0);
    }

    #[test]
    fn gradient_empty_input() {
        let theta = OeParams { b: vec![1.0], f: vec![-0.5] };
        let psi = gradient_psi(&theta, &[]);
        assert_eq!(psi.nrows(), 0);
        assert_eq!(psi.ncols(), 2);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(63);
        for _ in 0..10 {
            let nb = rand::Rng::gen_range(&mut rng, 1..4);
            let nf = rand::Rng::gen_range(&mut rng, 1..4);
            let theta = random_init(nb, nf, &mut rng);
            let u = white_input(40, &mut rng);
            let psi = gradient_psi(&theta, &u);
            let x0 = theta.to_vec();
            let step = 1e-6;
            for col in 0..theta.dim() {
                let mut xp = x0.clone();
                xp[col] += step;
                let mut xm = x0.clone();
                xm[col] -= step;
                let yp = predict_oe(&OeParams::from_vec(&xp, nb, nf), &u);
                let ym = predict_oe(&OeParams::from_vec(&xm, nb, nf), &u);
                for t in 0..40 {
                    let fd = (yp[t] - ym[t]) / (2.0 * step);
                    let scale = psi[(t, col)].abs().max(1.0);
                    assert!(
                        (psi[(t, col)] - fd).abs() < 1e-4 * scale,
                        "t={} col={} analytic={} fd={}",
                        t,
                        col,
                        psi[(t, col)],
                        fd
                    );
                }
            }
        }
    }

    #[test]
    fn fit_recovers_noiseless_second_order_model() {
        let mut rng = ChaCha8Rng::seed_from_u64(64);
        let truth = OeParams { b: vec![1.0, 0.5], f: vec![-1.2, 0.52] };
        assert!(truth.is_stable());
        let u = generate_bandlimited_input(300, 0.8, &mut rng);
        let y = predict_oe(&truth, &u);
        let data = Dataset { u, y, sigma2: 1e-12, seed: 0 };
        let fit = fit_oe(&data, 2, 2, None, &mut rng);
        assert!(fit.cost < 1e-10, "cost {}", fit.cost);
        let h_true = truth.impulse_response(50);
        let h_est = fit.theta.impulse_response(50);
        for (a, b) in h_true.taps.iter().zip(&h_est.taps) {
            assert!((a - b).abs() < 1e-5);
        }
    }

    #[test]
    fn fit_on_independent_noise_gives_small_gain() {
        let mut rng = ChaCha8Rng::seed_from_u64(65);
        let u = white_input(500, &mut rng);
        let y = white_input(500, &mut rng);
        let data = Dataset { u, y, sigma2: 1.0, seed: 0 };
        let fit = fit_oe(&data, 1, 1, None, &mut rng);
        assert!(fit.theta.b[0].abs() < 0.2, "b = {}", fit.theta.b[0]);
    }

    #[test]
    fn fit_cost_not_above_init_cost() {
        let mut rng = ChaCha8Rng::seed_from_u64(66);
        let u = white_input(200, &mut rng);
        let truth = OeParams { b: vec![0.7], f: vec![-0.6] };
        let y = predict_oe(&truth, &u);
        let data = Dataset { u, y, sigma2: 1.0, seed: 0 };
        let init = OeParams { b: vec![0.1], f: vec![0.3] };
        let init_cost = pem_cost(&init, &data);
        let fit = fit_oe(&data, 1, 1, Some(init), &mut rng);
        assert!(fit.cost <= init_cost);
    }

    #[test]
    fn asymptotic_covariance_fir_white_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(67);
        let u = white_input(20_000, &mut rng);
        let truth = OeParams { b: vec![1.0, -0.4, 0.2], f: vec![] };
        let sigma = 0.5f64;
        let y: Vec<f64> = predict_oe(&truth, &u)
            .iter()
            .map(|&v| {
                let e: f64 = StandardNormal.sample(&mut rng);
                v + sigma * e
            })
            .collect();
        let data = Dataset { u, y, sigma2: sigma * sigma, seed: 0 };
        let fit = fit_oe(&data, 3, 0, None, &mut rng);
        let cov = asymptotic_covariance(&fit, &data).unwrap();
        // white unit-variance input: Sigma ~ sigma^2 I
        for i in 0..3 {
            assert!(
                (cov.sigma_theta[(i, i)] - sigma * sigma).abs() < 0.1 * sigma * sigma,
                "diag {}",
                cov.sigma_theta[(i, i)]
            );
            for j in 0..3 {
                if i != j {
                    assert!(cov.sigma_theta[(i, j)].abs() < 0.05 * sigma * sigma);
                }
            }
        }
        // PSD + symmetric
        let eigs = cov.sigma_theta.clone().symmetric_eigen().eigenvalues;
        assert!(eigs.min() > 0.0);
    }

    #[test]
    fn asymptotic_set_cardinality_and_stability() {
        let mut rng = ChaCha8Rng::seed_from_u64(68);
        let u = white_input(300, &mut rng);
        let truth = OeParams { b: vec![1.0], f: vec![-0.7] };
        let data = simulate_oe(&truth.to_system(), &u, 10.0, 0, &mut rng);
        let fit = fit_oe(&data, 1, 1, None, &mut rng);
        let cov = asymptotic_covariance(&fit, &data).unwrap();
        let set =
            sample_asymptotic_confidence(&fit, &cov, 300, 1000, 0.95, 20, &mut rng).unwrap();
        assert_eq!(set.len(), 950);
        assert!(set.scores.iter().all(|&s| s >= set.threshold));
    }

    #[test]
    fn asymptotic_set_degenerate_covariance_collapses() {
        let mut rng = ChaCha8Rng::seed_from_u64(69);
        let u = white_input(300, &mut rng);
        let truth = OeParams { b: vec![1.0], f: vec![-0.7] };
        let data = simulate_oe(&truth.to_system(), &u, 10.0, 0, &mut rng);
        let fit = fit_oe(&data, 1, 1, None, &mut rng);
        let mut cov = asymptotic_covariance(&fit, &data).unwrap();
        cov.sigma_theta *= 1e-12;
        let set =
            sample_asymptotic_confidence(&fit, &cov, 300, 200, 0.95, 20, &mut rng).unwrap();
        let h_hat = fit.theta.impulse_response(20);
        for m in &set.members {
            for (a, b) in m.taps.iter().zip(&h_hat.taps) {
                assert!((a - b).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn likelihood_set_matches_conjugate_posterior_for_fir() {
        // linear-in-parameters FIR model: the likelihood over b is Gaussian
        // with mean (X^T X)^-1 X^T y and covariance sigma2 (X^T X)^-1
        let mut rng = ChaCha8Rng::seed_from_u64(70);
        let u = white_input(400, &mut rng);
        let truth = OeParams { b: vec![0.9, -0.4], f: vec![] };
        let sigma = 0.3f64;
        let y: Vec<f64> = predict_oe(&truth, &u)
            .iter()
            .map(|&v| {
                let e: f64 = StandardNormal.sample(&mut rng);
                v + sigma * e
            })
            .collect();
        let data = Dataset { u: u.clone(), y: y.clone(), sigma2: sigma * sigma, seed: 0 };
        let fit = fit_oe(&data, 2, 0, None, &mut rng);
        let n_keep = 20_000;
        let set = sample_likelihood_confidence(
            &fit,
            &data,
            sigma * sigma,
            2000,
            n_keep,
            0.9999,
            2,
            &mut rng,
        )
        .unwrap();
        // taps of an FIR member equal its b parameters, so the member mean
        // estimates the posterior mean of b
        let mean0: f64 =
            set.members.iter().map(|m| m.taps[0]).sum::<f64>() / set.len() as f64;
        let psi = gradient_psi(&fit.theta, &u);
        let gram = psi.transpose() * &psi;
        let post_mean = Cholesky::new(gram.clone())
            .unwrap()
            .solve(&(psi.transpose() * DVector::from_column_slice(&y)));
        let post_var = sigma * sigma * gram.try_inverse().unwrap()[(0, 0)];
        // 3 standard errors with a generous autocorrelation inflation
        let se = (post_var / set.len() as f64).sqrt() * 10.0;
        assert!(
            (mean0 - post_mean[0]).abs() < 3.0 * se,
            "chain mean {} posterior mean {} se {}",
            mean0,
            post_mean[0],
            se
        );
    }

    #[test]
    fn noise_variance_estimate_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        // y = e independent of u
        let u = white_input(500, &mut rng);
        let sigma = 0.8f64;
        let y: Vec<f64> = (0..500)
            .map(|_| {
                let e: f64 = StandardNormal.sample(&mut rng);
                sigma * e
            })
            .collect();
        let data = Dataset { u: u.clone(), y, sigma2: sigma * sigma, seed: 0 };
        let est = estimate_noise_variance_ls(&data, 100);
        assert!(
            (est - sigma * sigma).abs() < 0.2 * sigma * sigma,
            "estimate {} truth {}",
            est,
            sigma * sigma
        );

        // noiseless FIR data of the fitted length
        let taps: Vec<f64> = (0..50).map(|_| rand::Rng::gen_range(&mut rng, -0.5..0.5)).collect();
        let theta = OeParams { b: taps, f: vec![] };
        let y2 = predict_oe(&theta, &u);
        let data2 = Dataset { u, y: y2, sigma2: 0.0, seed: 0 };
        let est2 = estimate_noise_variance_ls(&data2, 50);
        assert!(est2 >= 0.0);
        assert!(est2 < 1e-10, "noiseless residual variance {}", est2);
    }

    #[test]
    fn bic_prefers_small_order_on_pure_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(72);
        let mut wins = 0;
        for _ in 0..10 {
            let u = white_input(300, &mut rng);
            let y = white_input(300, &mut rng);
            let data = Dataset { u, y, sigma2: 1.0, seed: 0 };
            let fit = select_order_bic(&data, 1..=4, &mut rng).unwrap();
            if fit.theta.nb() == 1 {
                wins += 1;
            }
        }
        assert!(wins > 5, "smallest order selected only {}/10 times", wins);
    }

    #[test]
    fn single_order_range_returns_that_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(73);
        let u = white_input(200, &mut rng);
        let truth = OeParams { b: vec![0.5], f: vec![-0.4] };
        let data = simulate_oe(&truth.to_system(), &u, 5.0, 0, &mut rng);
        let h = truth.impulse_response(30);
        let bic = select_order_bic(&data, 3..=3, &mut rng).unwrap();
        assert_eq!(bic.theta.nb(), 3);
        let or = select_order_oracle(&data, 3..=3, &h, &mut rng).unwrap();
        assert_eq!(or.theta.nb(), 3);
    }

    #[test]
    fn oracle_dominates_bic_on_the_fit_index() {
        let mut rng = ChaCha8Rng::seed_from_u64(74);
        let u = generate_bandlimited_input(400, 0.8, &mut rng);
        let sys = crate::system::generate_random_system(8, 0.95, &mut rng);
        let data = simulate_oe(&sys, &u, 1.0, 0, &mut rng);
        let true_h = impulse_response(&sys, 60);
        let sweep = fit_order_sweep(&data, 1..=10, &mut rng);
        let bic = select_bic_from_sweep(sweep.clone(), data.len()).unwrap();
        let or = select_oracle_from_sweep(sweep, &true_h).unwrap();
        let fit_bic = impulse_fit(&true_h, &bic.theta.impulse_response(60)).unwrap();
        let fit_or = impulse_fit(&true_h, &or.theta.impulse_response(60)).unwrap();
        assert!(fit_or >= fit_bic - 1e-12);
    }
}
