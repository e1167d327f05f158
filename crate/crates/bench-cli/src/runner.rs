//! Monte Carlo benchmark execution.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use sysid::kernel::{eb_confidence_set, eb_estimate};
use sysid::mcmc::{fb_confidence_set, fb_estimate};
use sysid::metrics::{coverage_index, envelope, impulse_fit, set_size_index};
use sysid::pem::{
    asymptotic_covariance, estimate_noise_variance_ls, fit_order_sweep,
    sample_asymptotic_confidence, sample_likelihood_confidence, select_bic_from_sweep,
    select_oracle_from_sweep, PemFit,
};
use sysid::system::{
    build_regressor, generate_bandlimited_input, generate_random_system, impulse_response,
    simulate_oe, Dataset, ImpulseResponse, RegressorMatrix,
};
use sysid::ConfidenceSet;

use crate::config::{BenchConfig, ConfidenceVariant, Estimator, Sigma2Mode};
use crate::records::{variant_tag, EnvelopeRecord, EtaRecord, RunRecord, TimingRecord};
use crate::seed::{run_seed, stream_seed};

#[derive(Debug, Default)]
pub struct BenchOutput {
    pub records: Vec<RunRecord>,
    pub timings: Vec<TimingRecord>,
    pub envelopes: Vec<EnvelopeRecord>,
    pub etas: Vec<EtaRecord>,
}

struct RunContext<'a> {
    cfg: &'a BenchConfig,
    run_index: usize,
    seed: u64,
    data: Dataset,
    phi: RegressorMatrix,
    true_h: ImpulseResponse,
    sigma2: f64,
    out: BenchOutput,
}

impl RunContext<'_> {
    fn rng(&self, tag: &str) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(stream_seed(self.seed, tag))
    }

    /// Append the record for one finished (estimator, variant) cell,
    /// together with its band and timing rows.
    fn push(
        &mut self,
        estimator: Estimator,
        variant: Option<ConfidenceVariant>,
        outcome: Result<CellOutcome, sysid::SysidError>,
        wall_ms: f64,
    ) {
        let variant = variant_tag(estimator, variant);
        let mut record = RunRecord {
            run_index: self.run_index,
            seed: self.seed,
            estimator,
            variant: variant.clone(),
            fit: None,
            coverage: None,
            set_size: None,
            order_selected: None,
            accept_rate: None,
            error: String::new(),
        };
        match outcome {
            Ok(cell) => {
                record.fit = Some(cell.fit);
                record.order_selected = cell.order_selected;
                record.accept_rate = cell.accept_rate;
                if let Some((set, h_est)) = cell.set {
                    match (coverage_index(&set, &self.true_h), set_size_index(&set)) {
                        (Ok(cov), Ok(size)) => {
                            record.coverage = Some(cov);
                            record.set_size = Some(size);
                        }
                        (Err(e), _) | (_, Err(e)) => record.error = e.to_string(),
                    }
                    if let Ok(band) = envelope(&set) {
                        for (i, (lo, hi)) in band.iter().enumerate() {
                            self.out.envelopes.push(EnvelopeRecord {
                                run_index: self.run_index,
                                estimator,
                                variant: variant.clone(),
                                tap: i + 1,
                                lower: *lo,
                                upper: *hi,
                                h_true: self.true_h.taps[i],
                                h_est: h_est.taps[i],
                            });
                        }
                    }
                }
            }
            Err(e) => record.error = e.to_string(),
        }
        self.out.timings.push(TimingRecord {
            run_index: self.run_index,
            estimator,
            variant,
            wall_ms,
        });
        self.out.records.push(record);
    }
}

struct CellOutcome {
    fit: f64,
    /// Confidence set plus the point estimate whose band it surrounds;
    /// `None` when only the point estimate was requested.
    set: Option<(ConfidenceSet, ImpulseResponse)>,
    order_selected: Option<usize>,
    accept_rate: Option<f64>,
}

/// Execute the whole study. Runs are independent and execute on the rayon
/// pool; outputs are concatenated in run order so results do not depend on
/// scheduling.
pub fn run_benchmark(cfg: &BenchConfig) -> BenchOutput {
    let mut parts: Vec<BenchOutput> = (0..cfg.runs)
        .into_par_iter()
        .map(|run_index| execute_run(cfg, run_index))
        .collect();
    let mut out = BenchOutput::default();
    for part in parts.drain(..) {
        out.records.extend(part.records);
        out.timings.extend(part.timings);
        out.envelopes.extend(part.envelopes);
        out.etas.extend(part.etas);
    }
    out
}

fn execute_run(cfg: &BenchConfig, run_index: usize) -> BenchOutput {
    let seed = run_seed(cfg.master_seed, run_index);
    let mut data_rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, "data"));
    let sys = generate_random_system(cfg.order, cfg.pole_radius, &mut data_rng);
    let u = generate_bandlimited_input(cfg.t, cfg.band, &mut data_rng);
    let data = simulate_oe(&sys, &u, cfg.snr, seed, &mut data_rng);
    let true_h = impulse_response(&sys, cfg.n);
    let phi = build_regressor(&data.u, cfg.n);
    let sigma2 = match cfg.sigma2_mode {
        Sigma2Mode::Estimated => estimate_noise_variance_ls(&data, cfg.n),
        Sigma2Mode::True => data.sigma2,
    };

    let mut ctx = RunContext {
        cfg,
        run_index,
        seed,
        data,
        phi,
        true_h,
        sigma2,
        out: BenchOutput::default(),
    };

    let want = |e: Estimator| cfg.estimators.contains(&e);
    if want(Estimator::Eb) || want(Estimator::Fb) {
        run_bayes(&mut ctx);
    }
    if want(Estimator::PemBic) || want(Estimator::PemOracle) {
        run_pem(&mut ctx);
    }
    ctx.out
}

fn run_bayes(ctx: &mut RunContext) {
    let cfg = ctx.cfg;
    let want_eb = cfg.estimators.contains(&Estimator::Eb);
    let want_fb = cfg.estimators.contains(&Estimator::Fb);

    // the hyperparameter fit is deterministic and shared with FB
    let start = Instant::now();
    let eb = eb_estimate(&ctx.data, cfg.n, ctx.sigma2);
    let eb_ms = start.elapsed().as_secs_f64() * 1e3;

    let (h_eb, post, eta) = match eb {
        Ok(parts) => parts,
        Err(e) => {
            if want_eb {
                ctx.push(Estimator::Eb, None, Err(e.clone()), eb_ms);
            }
            if want_fb {
                ctx.push(Estimator::Fb, None, Err(e), eb_ms);
            }
            return;
        }
    };
    ctx.out.etas.push(EtaRecord {
        run_index: ctx.run_index,
        c: eta.c,
        rho: eta.rho,
        lambda: eta.lambda,
    });

    if want_eb {
        let start = Instant::now();
        let mut rng = ctx.rng("eb");
        let fit = impulse_fit(&ctx.true_h, &h_eb);
        let outcome = fit.map(|fit| {
            let set = eb_confidence_set(&post, cfg.samples_n, cfg.alpha, &mut rng);
            CellOutcome {
                fit,
                set: Some((set, h_eb.clone())),
                order_selected: None,
                accept_rate: None,
            }
        });
        let ms = eb_ms + start.elapsed().as_secs_f64() * 1e3;
        ctx.push(Estimator::Eb, None, outcome, ms);
    }

    if want_fb {
        let start = Instant::now();
        let mut rng = ctx.rng("fb");
        let outcome = fb_estimate(
            &ctx.data,
            &ctx.phi,
            ctx.sigma2,
            &eta,
            cfg.fb_burn_in,
            cfg.samples_n,
            &mut rng,
        )
        .and_then(|fb| {
            let fit = impulse_fit(&ctx.true_h, &fb.h_fb)?;
            let set = fb_confidence_set(&fb, &ctx.data, &ctx.phi, ctx.sigma2, cfg.alpha)?;
            Ok(CellOutcome {
                fit,
                set: Some((set, fb.h_fb.clone())),
                order_selected: None,
                accept_rate: Some(fb.acceptance_rate),
            })
        });
        let ms = eb_ms + start.elapsed().as_secs_f64() * 1e3;
        ctx.push(Estimator::Fb, None, outcome, ms);
    }
}

fn run_pem(ctx: &mut RunContext) {
    let cfg = ctx.cfg;
    // one order sweep feeds both selectors, on its own random stream so
    // either PEM estimator alone reproduces the joint results
    let start = Instant::now();
    let mut sweep_rng = ctx.rng("pem");
    let sweep = fit_order_sweep(
        &ctx.data,
        cfg.bic_order_min..=cfg.bic_order_max,
        &mut sweep_rng,
    );
    let sweep_ms = start.elapsed().as_secs_f64() * 1e3;

    for estimator in [Estimator::PemBic, Estimator::PemOracle] {
        if !cfg.estimators.contains(&estimator) {
            continue;
        }
        let selected = match estimator {
            Estimator::PemBic => select_bic_from_sweep(sweep.clone(), ctx.data.len()),
            _ => select_oracle_from_sweep(sweep.clone(), &ctx.true_h),
        };
        let variants: Vec<Option<ConfidenceVariant>> = if cfg.confidence_variants.is_empty() {
            vec![None]
        } else {
            cfg.confidence_variants.iter().map(|&v| Some(v)).collect()
        };
        // the shared sweep dominates the cost; charge it to the first cell
        let mut sweep_charge = sweep_ms;
        for variant in variants {
            let start = Instant::now();
            let outcome = selected.as_ref().map_err(|e| e.clone()).and_then(|fit| {
                pem_cell(ctx, estimator, fit, variant)
            });
            let ms = sweep_charge + start.elapsed().as_secs_f64() * 1e3;
            sweep_charge = 0.0;
            ctx.push(estimator, variant, outcome, ms);
        }
    }
}

fn pem_cell(
    ctx: &RunContext,
    estimator: Estimator,
    fit: &PemFit,
    variant: Option<ConfidenceVariant>,
) -> Result<CellOutcome, sysid::SysidError> {
    let cfg = ctx.cfg;
    let h_est = fit.theta.impulse_response(cfg.n);
    let fit_index = impulse_fit(&ctx.true_h, &h_est)?;
    let order = fit.theta.nf();
    let set = match variant {
        Some(ConfidenceVariant::Asymptotic) => {
            let mut rng = ctx.rng(&format!("{}-asymp", estimator.tag()));
            let cov = asymptotic_covariance(fit, &ctx.data)?;
            Some(sample_asymptotic_confidence(
                fit,
                &cov,
                ctx.data.len(),
                cfg.samples_n,
                cfg.alpha,
                cfg.n,
                &mut rng,
            )?)
        }
        Some(ConfidenceVariant::Likelihood) => {
            let mut rng = ctx.rng(&format!("{}-lik", estimator.tag()));
            Some(sample_likelihood_confidence(
                fit,
                &ctx.data,
                fit.sigma2_hat.max(1e-12),
                cfg.fb_burn_in,
                cfg.samples_n,
                cfg.alpha,
                cfg.n,
                &mut rng,
            )?)
        }
        None => None,
    };
    Ok(CellOutcome {
        fit: fit_index,
        set: set.map(|s| (s, h_est)),
        order_selected: Some(order),
        accept_rate: None,
    })
}
