//! Evaluation indices: impulse-response fit, confidence-set coverage and
//! confidence-set envelope size.

use crate::confidence::ConfidenceSet;
use crate::error::SysidError;
use crate::system::ImpulseResponse;

/// Metrics for one estimator on one Monte Carlo run.
#[derive(Debug, Clone)]
pub struct RunMetrics {
    /// Percent fit of the point estimate; can be negative.
    pub fit: f64,
    /// Minimum relative distance from the true response to the set.
    pub coverage: f64,
    /// Total tap-wise envelope area of the set.
    pub set_size: f64,
    /// Estimator label, e.g. "eb" or "pem-bic/asymp".
    pub estimator_tag: String,
}

/// Percent fit `100 * (1 - ||h - hhat|| / ||h||)` (Euclidean norms).
pub fn impulse_fit(true_h: &ImpulseResponse, est_h: &ImpulseResponse) -> Result<f64, SysidError> {
    assert_eq!(true_h.len(), est_h.len(), "length mismatch");
    let norm = true_h.norm();
    if norm == 0.0 {
        return Err(SysidError::ZeroTrueNorm);
    }
    let err: f64 = true_h
        .taps
        .iter()
        .zip(&est_h.taps)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    Ok(100.0 * (1.0 - err / norm))
}

/// Minimum over set members of the relative distance to the true response.
pub fn coverage_index(set: &ConfidenceSet, true_h: &ImpulseResponse) -> Result<f64, SysidError> {
    if set.is_empty() {
        return Err(SysidError::EmptySet);
    }
    let norm = true_h.norm();
    if norm == 0.0 {
        return Err(SysidError::ZeroTrueNorm);
    }
    let min_dist = set
        .members
        .iter()
        .map(|m| {
            m.taps
                .iter()
                .zip(&true_h.taps)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        })
        .fold(f64::INFINITY, f64::min);
    Ok(min_dist / norm)
}

/// Sum over taps of the member-wise max minus min (envelope area).
pub fn set_size_index(set: &ConfidenceSet) -> Result<f64, SysidError> {
    if set.is_empty() {
        return Err(SysidError::EmptySet);
    }
    let n = set.members[0].len();
    let mut total = 0.0;
    for j in 0..n {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for m in &set.members {
            lo = lo.min(m.taps[j]);
            hi = hi.max(m.taps[j]);
        }
        total += hi - lo;
    }
    Ok(total)
}

/// Tap-wise envelope `(min, max)` of a set; used for the per-run envelope
/// report.
pub fn envelope(set: &ConfidenceSet) -> Result<Vec<(f64, f64)>, SysidError> {
    if set.is_empty() {
        return Err(SysidError::EmptySet);
    }
    let n = set.members[0].len();
    let mut out = vec![(f64::INFINITY, f64::NEG_INFINITY); n];
    for m in &set.members {
        for (o, t) in out.iter_mut().zip(&m.taps) {
            o.0 = o.0.min(*t);
            o.1 = o.1.max(*t);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ir(taps: &[f64]) -> ImpulseResponse {
        ImpulseResponse { taps: taps.to_vec() }
    }

    fn set_of(members: &[&[f64]]) -> ConfidenceSet {
        ConfidenceSet {
            members: members.iter().map(|m| ir(m)).collect(),
            scores: vec![0.0; members.len()],
            alpha: 0.95,
            threshold: 0.0,
        }
    }

    #[test]
    fn fit_examples() {
        let h = ir(&[1.0, 2.0, 3.0]);
        assert_eq!(impulse_fit(&h, &h).unwrap(), 100.0);
        assert_eq!(impulse_fit(&h, &ir(&[0.0, 0.0, 0.0])).unwrap(), 0.0);
        assert_eq!(impulse_fit(&h, &ir(&[2.0, 4.0, 6.0])).unwrap(), 0.0);
    }

    #[test]
    fn fit_zero_norm_errors() {
        let z = ir(&[0.0, 0.0]);
        assert!(matches!(impulse_fit(&z, &z), Err(SysidError::ZeroTrueNorm)));
    }

    #[test]
    fn coverage_examples() {
        let h = ir(&[1.0, 1.0]);
        let s = set_of(&[&[1.0, 1.0], &[5.0, 5.0]]);
        assert_eq!(coverage_index(&s, &h).unwrap(), 0.0);

        let s2 = set_of(&[&[2.0, 2.0]]);
        assert!((coverage_index(&s2, &h).unwrap() - 1.0).abs() < 1e-12);

        let s3 = set_of(&[&[1.0, 0.0], &[0.0, 2.0]]);
        assert!((coverage_index(&s3, &h).unwrap() - 1.0 / 2.0f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn set_size_examples() {
        let singleton = set_of(&[&[1.0, -2.0, 0.5]]);
        assert_eq!(set_size_index(&singleton).unwrap(), 0.0);

        let s = set_of(&[&[1.0, 0.0], &[0.0, 1.0]]);
        assert_eq!(set_size_index(&s).unwrap(), 2.0);

        // adding a member inside the envelope changes nothing
        let s2 = set_of(&[&[1.0, 0.0], &[0.0, 1.0], &[0.5, 0.5]]);
        assert_eq!(set_size_index(&s2).unwrap(), 2.0);
    }

    #[test]
    fn monotonicity_under_enlargement() {
        let h = ir(&[1.0, 1.0]);
        let small = set_of(&[&[3.0, 3.0]]);
        let large = set_of(&[&[3.0, 3.0], &[1.2, 1.2]]);
        assert!(coverage_index(&large, &h).unwrap() <= coverage_index(&small, &h).unwrap());
        assert!(set_size_index(&large).unwrap() >= set_size_index(&small).unwrap());
    }

    #[test]
    fn scale_covariance() {
        let h = ir(&[1.0, -0.5, 0.25]);
        let hh = ir(&[0.9, -0.4, 0.2]);
        let gamma = 3.7;
        let gh = ir(&h.taps.iter().map(|x| gamma * x).collect::<Vec<_>>());
        let ghh = ir(&hh.taps.iter().map(|x| gamma * x).collect::<Vec<_>>());
        assert!((impulse_fit(&h, &hh).unwrap() - impulse_fit(&gh, &ghh).unwrap()).abs() < 1e-10);

        let s = set_of(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.5]]);
        let scaled = set_of(&[&[gamma, 0.0, 0.0], &[0.0, gamma, 0.5 * gamma]]);
        assert!(
            (set_size_index(&scaled).unwrap() - gamma * set_size_index(&s).unwrap()).abs() < 1e-10
        );
    }

    #[test]
    fn empty_set_errors() {
        let empty = ConfidenceSet {
            members: vec![],
            scores: vec![],
            alpha: 0.95,
            threshold: 0.0,
        };
        let h = ir(&[1.0]);
        assert!(matches!(coverage_index(&empty, &h), Err(SysidError::EmptySet)));
        assert!(matches!(set_size_index(&empty), Err(SysidError::EmptySet)));
    }
}
