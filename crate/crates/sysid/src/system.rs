//! Discrete-time LTI systems, benchmark data generation and the FIR
//! regressor matrix.
//!
//! Conventions: systems are rational in the delay operator,
//! `y(t) = B(q^-1)/F(q^-1) u(t)`, with `F` monic. Generated benchmark
//! systems are strictly proper, so the lag-0 response is zero and impulse
//! responses are indexed over lags `1..=n` (tap `k-1` holds the response at
//! lag `k`). The regressor row at time `t` holds `u(t-1), ..., u(t-n)` with
//! pre-experiment inputs taken as zero, so `phi * h` is the truncated
//! convolution `[h * u](t)`.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::poly::{self, C64};

/// Rational SISO transfer function `B(q^-1)/F(q^-1)`.
///
/// `num[k]` is the coefficient of `q^-k` in `B`; `den[k]` the coefficient of
/// `q^-k` in `F`, with `den[0] = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteSystem {
    pub num: Vec<f64>,
    pub den: Vec<f64>,
}

impl DiscreteSystem {
    pub fn new(num: Vec<f64>, den: Vec<f64>) -> Self {
        assert!(!den.is_empty() && den[0] == 1.0, "denominator must be monic");
        DiscreteSystem { num, den }
    }

    /// True iff all denominator roots lie strictly inside the unit circle.
    pub fn is_stable(&self) -> bool {
        poly::is_schur_stable(&self.den)
    }

    /// Magnitudes of the denominator roots (poles).
    pub fn pole_magnitudes(&self) -> Vec<f64> {
        poly::roots(&self.den).iter().map(|r| r.norm()).collect()
    }

    /// Run the difference equation
    /// `y(t) = sum_k num[k] u(t-k) - sum_{j>=1} den[j] y(t-j)`
    /// over the input, zero initial conditions.
    pub fn simulate(&self, u: &[f64]) -> Vec<f64> {
        let t_len = u.len();
        let mut y = vec![0.0; t_len];
        for t in 0..t_len {
            let mut acc = 0.0;
            for (k, b) in self.num.iter().enumerate() {
                if t >= k {
                    acc += b * u[t - k];
                }
            }
            for (j, f) in self.den.iter().enumerate().skip(1) {
                if t >= j {
                    acc -= f * y[t - j];
                }
            }
            y[t] = acc;
        }
        y
    }
}

/// Truncated impulse response; `taps[k-1]` is the response at lag `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpulseResponse {
    pub taps: Vec<f64>,
}

impl ImpulseResponse {
    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.taps.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// One identification experiment: input, noisy output, the true innovation
/// variance and the seed the data was generated from.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub u: Vec<f64>,
    pub y: Vec<f64>,
    pub sigma2: f64,
    pub seed: u64,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

/// `T x n` matrix whose row `t` (1-indexed) is `u(t-1), ..., u(t-n)`.
#[derive(Debug, Clone)]
pub struct RegressorMatrix {
    pub phi: DMatrix<f64>,
}

/// Response of `sys` to a unit pulse, recorded at lags `1..=n`.
pub fn impulse_response(sys: &DiscreteSystem, n: usize) -> ImpulseResponse {
    assert!(n >= 1);
    let mut pulse = vec![0.0; n + 1];
    pulse[0] = 1.0;
    let y = sys.simulate(&pulse);
    ImpulseResponse { taps: y[1..=n].to_vec() }
}

/// Random stable system of the given order, built by partial fractions:
/// rim-biased conjugate pole pairs with stratified phases, random residues
/// with a geometric per-mode energy profile, strictly proper,
/// impulse-response energy normalized to 1 over the first 100 taps.
pub fn generate_random_system<R: Rng>(
    order: usize,
    pole_radius: f64,
    rng: &mut R,
) -> DiscreteSystem {
    assert!(order >= 1);
    assert!(pole_radius > 0.0 && pole_radius < 1.0);
    loop {
        let poles = sample_pole_roots(order, pole_radius, rng);
        const ENERGY_RATIO: f64 = 0.8;
        let mut residues: Vec<C64> = Vec::with_capacity(order);
        let mut i = 0;
        let mut mode_index = 0;
        while i < poles.len() {
            let p = poles[i];
            // geometric energy ladder over the frequency slots: a few
            // dominant slow modes and a long tail of progressively weaker
            // fast ripples
            let tilt = ENERGY_RATIO.powf(0.5 * mode_index as f64);
            mode_index += 1;
            let scale =
                (1.0 - p.norm_sqr()).max(1e-6).sqrt() * tilt * rng.gen_range(0.7..1.4);
            if p.im != 0.0 {
                let phase = rng.gen_range(0.0..2.0 * std::f64::consts::PI);
                let r = C64::new(phase.cos(), phase.sin()) * scale;
                residues.push(r);
                residues.push(r.conj());
                i += 2;
            } else {
                let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                residues.push(C64::new(sign * scale, 0.0));
                i += 1;
            }
        }
        // B(q^-1)/F(q^-1) = sum_i r_i q^-1 / (1 - p_i q^-1)
        let den = poly::poly_from_roots(&poles);
        let mut num_c = vec![C64::new(0.0, 0.0); order + 1];
        for (i, r) in residues.iter().enumerate() {
            // prod_{j != i} (1 - p_j x)
            let mut partial = vec![C64::new(1.0, 0.0)];
            for (j, p) in poles.iter().enumerate() {
                if j != i {
                    let mut next = vec![C64::new(0.0, 0.0); partial.len() + 1];
                    for (k, c) in partial.iter().enumerate() {
                        next[k] += c;
                        next[k + 1] -= c * p;
                    }
                    partial = next;
                }
            }
            for (k, c) in partial.iter().enumerate() {
                num_c[k + 1] += r * c;
            }
        }
        let num: Vec<f64> = num_c.iter().map(|c| c.re).collect();
        let mut sys = DiscreteSystem::new(num, den);
        let h = impulse_response(&sys, 100);
        let norm = h.norm();
        if norm > 1e-8 && norm.is_finite() {
            for b in sys.num.iter_mut() {
                *b /= norm;
            }
            return sys;
        }
        // pathological pole/zero cancellation; draw again
    }
}

/// Pole set of a random benchmark system: conjugate pairs with magnitudes
/// biased towards the rim and phases stratified over the frequency axis,
/// one jittered slot per pair.
fn sample_pole_roots<R: Rng>(count: usize, radius: f64, rng: &mut R) -> Vec<C64> {
    let mut out = Vec::with_capacity(count);
    let pairs = count / 2;
    for i in 0..pairs {
        // bias magnitudes towards the rim so most modes are lightly
        // damped resonances rather than broad humps
        let mag = radius * rng.gen::<f64>().powf(0.3);
        // stratified phases over the whole frequency axis: one jittered
        // slot per pair, so the modes stay separated instead of clumping
        let ang = std::f64::consts::PI * (i as f64 + rng.gen::<f64>()) / pairs as f64;
        let r = C64::new(mag * ang.cos(), mag * ang.sin());
        out.push(r);
        out.push(r.conj());
    }
    if count % 2 == 1 {
        let mag = radius * rng.gen::<f64>().sqrt();
        out.push(C64::new(mag, 0.0));
    }
    out
}

/// `count` roots inside the disk of the given radius, closed under
/// conjugation: `count/2` conjugate pairs plus one real root when odd.
/// Magnitudes are drawn with uniform squared magnitude (area-uniform).
pub(crate) fn sample_disk_roots<R: Rng>(count: usize, radius: f64, rng: &mut R) -> Vec<C64> {
    let mut out = Vec::with_capacity(count);
    for _ in 0..count / 2 {
        let mag = radius * rng.gen::<f64>().sqrt();
        let ang = rng.gen_range(0.0..std::f64::consts::PI);
        let r = C64::new(mag * ang.cos(), mag * ang.sin());
        out.push(r);
        out.push(r.conj());
    }
    if count % 2 == 1 {
        let mag = radius * rng.gen::<f64>().sqrt();
        let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
        out.push(C64::new(sign * mag, 0.0));
    }
    out
}

/// Zero-mean Gaussian signal low-pass filtered to the normalized band
/// `[0, band]` (band in units of the Nyquist frequency), centered and
/// rescaled to unit sample variance.
///
/// The filter is a Hamming-windowed sinc of order 64; its transient is
/// discarded.
pub fn generate_bandlimited_input<R: Rng>(t_len: usize, band: f64, rng: &mut R) -> Vec<f64> {
    assert!(t_len >= 1);
    assert!(band > 0.0 && band <= 1.0);
    const ORDER: usize = 64;
    let mid = ORDER as f64 / 2.0;
    let mut taps = Vec::with_capacity(ORDER + 1);
    for k in 0..=ORDER {
        let x = k as f64 - mid;
        let sinc = if x == 0.0 {
            1.0
        } else {
            (std::f64::consts::PI * band * x).sin() / (std::f64::consts::PI * band * x)
        };
        let window = 0.54 - 0.46 * (2.0 * std::f64::consts::PI * k as f64 / ORDER as f64).cos();
        taps.push(band * sinc * window);
    }
    let white: Vec<f64> = (0..t_len + ORDER)
        .map(|_| StandardNormal.sample(rng))
        .collect();
    let mut out = vec![0.0; t_len];
    for t in 0..t_len {
        let mut acc = 0.0;
        for (j, h) in taps.iter().enumerate() {
            acc += h * white[t + ORDER - j];
        }
        out[t] = acc;
    }
    let mean = out.iter().sum::<f64>() / t_len as f64;
    let var = out.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / t_len as f64;
    let scale = if var > 0.0 { var.sqrt() } else { 1.0 };
    for x in out.iter_mut() {
        *x = (*x - mean) / scale;
    }
    out
}

/// Simulate the output-error model `y = sys(u) + e`, with the white-noise
/// variance set from the noiseless output so that the signal-to-noise ratio
/// equals `snr`.
pub fn simulate_oe<R: Rng>(
    sys: &DiscreteSystem,
    u: &[f64],
    snr: f64,
    seed: u64,
    rng: &mut R,
) -> Dataset {
    assert!(snr > 0.0);
    let noiseless = sys.simulate(u);
    let t_len = noiseless.len();
    let mean = noiseless.iter().sum::<f64>() / t_len as f64;
    let signal_var = noiseless.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / t_len as f64;
    let sigma2 = signal_var / snr;
    let sigma = sigma2.sqrt();
    let y: Vec<f64> = noiseless
        .iter()
        .map(|&x| {
            let e: f64 = StandardNormal.sample(rng);
            x + sigma * e
        })
        .collect();
    Dataset { u: u.to_vec(), y, sigma2, seed }
}

/// Build the `T x n` past-input regressor matrix for the FIR representation.
pub fn build_regressor(u: &[f64], n: usize) -> RegressorMatrix {
    assert!(n >= 1);
    let t_len = u.len();
    let mut phi = DMatrix::<f64>::zeros(t_len, n);
    for t in 0..t_len {
        for k in 0..n {
            // entry (t, k) 0-indexed is u((t+1) - (k+1)) = u[t - k - 1 + ...]
            if t > k {
                phi[(t, k)] = u[t - k - 1];
            }
        }
    }
    RegressorMatrix { phi }
}
