//! Polynomial utilities for monic denominator polynomials in the delay
//! operator: root solving, Schur stability tests and stabilization.
//!
//! A coefficient vector `[1, f1, ..., fn]` stands for
//! `F(q^-1) = 1 + f1 q^-1 + ... + fn q^-n`; its poles are the roots of
//! `z^n + f1 z^(n-1) + ... + fn`.

use nalgebra::{Complex, DMatrix};

pub type C64 = Complex<f64>;

/// Roots of the monic polynomial `z^n + c[1] z^(n-1) + ... + c[n]`,
/// computed as eigenvalues of the companion matrix.
///
/// `coeffs[0]` must be 1 (or at least nonzero; the vector is normalized).
pub fn roots(coeffs: &[f64]) -> Vec<C64> {
    assert!(!coeffs.is_empty() && coeffs[0] != 0.0, "leading coefficient must be nonzero");
    let n = coeffs.len() - 1;
    if n == 0 {
        return Vec::new();
    }
    let mut companion = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        companion[(0, i)] = -coeffs[i + 1] / coeffs[0];
    }
    for i in 1..n {
        companion[(i, i - 1)] = 1.0;
    }
    companion.complex_eigenvalues().iter().copied().collect()
}

/// Schur stability of the monic polynomial `[1, f1, ..., fn]`: true iff all
/// roots lie strictly inside the unit circle.
///
/// Uses the Schur-Cohn reduction (O(n^2)), so it is cheap enough for
/// per-proposal rejection tests inside samplers.
pub fn is_schur_stable(coeffs: &[f64]) -> bool {
    if coeffs.iter().any(|c| !c.is_finite()) {
        return false;
    }
    let mut c: Vec<f64> = coeffs.to_vec();
    if c[0] != 1.0 {
        let lead = c[0];
        for v in c.iter_mut() {
            *v /= lead;
        }
    }
    while c.len() > 1 {
        let m = c.len() - 1;
        let k = c[m];
        if k.abs() >= 1.0 || !k.is_finite() {
            return false;
        }
        let denom = 1.0 - k * k;
        let mut next = Vec::with_capacity(m);
        for i in 0..m {
            next.push((c[i] - k * c[m - i]) / denom);
        }
        c = next;
    }
    true
}

/// Expand a set of roots (closed under conjugation) into the coefficients of
/// the monic polynomial `prod (z - r_i)`, returned highest power first.
pub fn poly_from_roots(roots: &[C64]) -> Vec<f64> {
    let mut c: Vec<C64> = vec![C64::new(1.0, 0.0)];
    for r in roots {
        let mut next = vec![C64::new(0.0, 0.0); c.len() + 1];
        for (i, ci) in c.iter().enumerate() {
            next[i] += ci;
            next[i + 1] -= ci * r;
        }
        c = next;
    }
    // imaginary parts cancel for conjugate-closed root sets
    c.iter().map(|z| z.re).collect()
}

/// Polynomial product (coefficient convolution); the coefficient ordering
/// of the inputs is preserved in the output.
pub fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    assert!(!a.is_empty() && !b.is_empty());
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &ai) in a.iter().enumerate() {
        for (j, &bj) in b.iter().enumerate() {
            out[i + j] += ai * bj;
        }
    }
    out
}

/// Reflect every root with magnitude >= 1 inside the unit circle
/// (`r -> 1/conj(r)`, unit-magnitude roots nudged inward) and rebuild the
/// monic polynomial. Stable inputs are returned unchanged.
pub fn stabilize(coeffs: &[f64]) -> Vec<f64> {
    if is_schur_stable(coeffs) {
        return coeffs.to_vec();
    }
    let mut rs = roots(coeffs);
    for r in rs.iter_mut() {
        let mag = r.norm();
        if mag >= 1.0 {
            if mag > 1.0 {
                *r = r.unscale(mag * mag); // = 1/conj(r)
            } else {
                *r = r.scale(0.99);
            }
        }
    }
    poly_from_roots(&rs)
}
