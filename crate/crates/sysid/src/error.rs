use thiserror::Error;

/// Errors surfaced by the estimation and sampling routines.
///
/// Non-convergence of the local optimizers is not an error: the best iterate
/// is returned with a `converged = false` flag instead.
#[derive(Debug, Clone, Error)]
pub enum SysidError {
    /// The sample information matrix at the PEM optimum is numerically
    /// singular even after regularization.
    #[error("sample information matrix is singular at the estimate")]
    SingularInformation,

    /// Stability rejection sampling accepted fewer than one draw per 1000
    /// attempts; the truncated Gaussian is effectively unreachable.
    #[error("stability truncation starved: acceptance rate below 1e-3")]
    TruncationStarvation,

    /// The Metropolis chain acceptance rate dropped below 1% after burn-in.
    #[error("MCMC chain stalled: post-burn-in acceptance rate {rate:.4} < 0.01")]
    ChainStalled { rate: f64 },

    /// A covariance factorization failed; the hyperparameters or the noise
    /// variance describe an invalid model.
    #[error("covariance matrix is not positive definite")]
    NonPositiveDefinite,

    /// Every candidate order in an order-selection sweep failed to fit.
    #[error("no model order in the sweep produced a usable fit")]
    AllFitsFailed,

    /// A set index was requested on an empty confidence set.
    #[error("confidence set is empty")]
    EmptySet,

    /// The true impulse response has zero norm; relative indices are undefined.
    #[error("true impulse response has zero norm")]
    ZeroTrueNorm,
}
