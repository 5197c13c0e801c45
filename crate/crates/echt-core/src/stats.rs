//! Circular statistics for phase-error evaluation: wrapping, error
//! summaries (circular mean/std, PLV, PLI) and a paired label-swap
//! permutation test on per-recording circular means.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{EchtError, Result};

/// Wrap an angle to (-pi, pi].
pub fn wrap(angle: f64) -> f64 {
    let wrapped = angle.rem_euclid(2.0 * PI);
    if wrapped > PI {
        wrapped - 2.0 * PI
    } else {
        wrapped
    }
}

/// Summary of a sample of wrapped phase errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    /// arg of the resultant vector, in (-pi, pi].
    pub circular_mean: f64,
    /// sqrt(-2 ln PLV): circular dispersion in radians.
    pub circular_std: f64,
    /// Ordinary (linear) standard deviation of the wrapped errors.
    pub linear_std: f64,
    /// Mean absolute wrapped error.
    pub mean_abs: f64,
    pub max_abs: f64,
    /// |mean resultant|: concentration on the unit circle, in [0, 1].
    pub plv: f64,
    /// |mean sign|: directional asymmetry, zeros excluded, in [0, 1].
    pub pli: f64,
    pub n: usize,
}

/// Summarise a sample of phase differences (radians; wrapped internally).
pub fn summarize_errors(deltas: &[f64]) -> Result<ErrorStats> {
    if deltas.is_empty() {
        return Err(EchtError::InvalidArgument("cannot summarise an empty sample".into()));
    }
    let n = deltas.len();
    let mut resultant = Complex64::new(0.0, 0.0);
    let mut sign_sum = 0i64;
    let mut sign_count = 0usize;
    let mut abs_sum = 0.0;
    let mut max_abs = 0.0f64;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for &d in deltas {
        let w = wrap(d);
        resultant += Complex64::from_polar(1.0, w);
        if w != 0.0 {
            sign_sum += if w > 0.0 { 1 } else { -1 };
            sign_count += 1;
        }
        abs_sum += w.abs();
        max_abs = max_abs.max(w.abs());
        sum += w;
        sum_sq += w * w;
    }
    let plv = (resultant.norm() / n as f64).min(1.0);
    let mean = sum / n as f64;
    let variance = (sum_sq / n as f64 - mean * mean).max(0.0);
    Ok(ErrorStats {
        circular_mean: resultant.arg(),
        circular_std: if plv > 0.0 { (-2.0 * plv.ln()).sqrt() } else { f64::INFINITY },
        linear_std: variance.sqrt(),
        mean_abs: abs_sum / n as f64,
        max_abs,
        plv,
        pli: if sign_count > 0 { (sign_sum.abs() as f64 / n as f64).min(1.0) } else { 0.0 },
        n,
    })
}

/// Weighted circular mean arg(sum w_i e^{j mu_i}).
fn weighted_circular_mean(mu: &[f64], w: &[f64]) -> f64 {
    mu.iter()
        .zip(w)
        .map(|(&m, &wi)| Complex64::from_polar(wi, m))
        .sum::<Complex64>()
        .arg()
}

/// Paired label-swap permutation test for a difference between two sets of
/// per-recording circular means.
///
/// Statistic: |wrap(arg sum w e^{j mu_unc} - arg sum w e^{j mu_cal})|.
/// Each permutation swaps the (unc, cal) labels of each pair with an
/// independent fair coin flip. Two-sided p-value with the +1/+1 correction.
pub fn paired_circular_permutation_test(
    mu_unc: &[f64],
    mu_cal: &[f64],
    weights: &[f64],
    n_perm: usize,
    seed: u64,
) -> Result<f64> {
    let n = mu_unc.len();
    if n != mu_cal.len() || n != weights.len() {
        return Err(EchtError::InvalidArgument(
            "per-recording means and weights must have equal lengths".into(),
        ));
    }
    if n < 2 {
        return Err(EchtError::InvalidArgument("need at least 2 recordings".into()));
    }
    if n_perm < 100 {
        return Err(EchtError::InvalidArgument("need at least 100 permutations".into()));
    }
    let observed =
        wrap(weighted_circular_mean(mu_unc, weights) - weighted_circular_mean(mu_cal, weights)).abs();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut at_least_as_large = 0usize;
    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];
    for _ in 0..n_perm {
        for i in 0..n {
            if rng.gen::<bool>() {
                a[i] = mu_cal[i];
                b[i] = mu_unc[i];
            } else {
                a[i] = mu_unc[i];
                b[i] = mu_cal[i];
            }
        }
        let stat =
            wrap(weighted_circular_mean(&a, weights) - weighted_circular_mean(&b, weights)).abs();
        if stat >= observed {
            at_least_as_large += 1;
        }
    }
    Ok((at_least_as_large + 1) as f64 / (n_perm + 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_basics() {
        assert_eq!(wrap(0.0), 0.0);
        assert_eq!(wrap(PI), PI);
        assert_eq!(wrap(-PI), PI);
        assert!((wrap(3.0 * PI + 0.1) - (-PI + 0.1)).abs() < 1e-12);
        assert!((wrap(-5.5 * PI) - 0.5 * PI).abs() < 1e-12);
    }

    #[test]
    fn degenerate_distribution() {
        let stats = summarize_errors(&vec![0.3; 40]).unwrap();
        assert!((stats.circular_mean - 0.3).abs() < 1e-12);
        assert!((stats.plv - 1.0).abs() < 1e-12);
        assert!((stats.pli - 1.0).abs() < 1e-12);
        assert!(stats.circular_std < 1e-6);
    }

    #[test]
    fn symmetric_pair_cancels() {
        let stats = summarize_errors(&[0.4, -0.4, 0.4, -0.4]).unwrap();
        assert!(stats.circular_mean.abs() < 1e-12);
        assert_eq!(stats.pli, 0.0);
    }

    #[test]
    fn zeros_excluded_from_pli() {
        let stats = summarize_errors(&[0.0, 0.0, 0.2, 0.3]).unwrap();
        // Two positive signs over n = 4.
        assert!((stats.pli - 0.5).abs() < 1e-12);
    }

    #[test]
    fn wrapped_gaussian_plv() {
        // PLV of a wrapped Gaussian with std sigma is e^{-sigma^2/2}.
        let sigma = 10f64.to_radians();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let normal = rand_distr::Normal::new(0.0, sigma).unwrap();
        let sample: Vec<f64> = (0..10_000).map(|_| rng.sample(normal)).collect();
        let stats = summarize_errors(&sample).unwrap();
        let expect = (-sigma * sigma / 2.0).exp();
        assert!((stats.plv / expect - 1.0).abs() < 0.01);
    }

    #[test]
    fn plv_is_rotation_invariant() {
        let base = [0.1, -0.7, 0.4, 1.2, -0.2];
        let stats = summarize_errors(&base).unwrap();
        let shift = 0.9;
        let rotated: Vec<f64> = base.iter().map(|&d| d + shift).collect();
        let stats_rot = summarize_errors(&rotated).unwrap();
        assert!((stats.plv - stats_rot.plv).abs() < 1e-12);
        assert!((wrap(stats_rot.circular_mean - stats.circular_mean) - shift).abs() < 1e-12);
    }

    #[test]
    fn empty_sample_rejected() {
        assert!(summarize_errors(&[]).is_err());
    }

    #[test]
    fn permutation_test_null_and_effect() {
        let n = 50;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let normal = rand_distr::Normal::new(0.0, 0.05).unwrap();
        let base: Vec<f64> = (0..n).map(|_| rng.sample(normal)).collect();
        let weights = vec![1.0; n];
        // Identical samples: observed statistic 0, p = 1.
        let p = paired_circular_permutation_test(&base, &base, &weights, 1000, 3).unwrap();
        assert!(p > 0.99);
        // 20 degree constant offset: decisive rejection.
        let offset: Vec<f64> = base.iter().map(|&m| m + 20f64.to_radians()).collect();
        let p = paired_circular_permutation_test(&offset, &base, &weights, 10_000, 3).unwrap();
        assert!(p < 0.001, "p = {p}");
    }

    #[test]
    fn permutation_test_is_seed_reproducible_and_monotone() {
        let n = 30;
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let normal = rand_distr::Normal::new(0.0, 0.3).unwrap();
        let base: Vec<f64> = (0..n).map(|_| rng.sample(normal)).collect();
        let weights = vec![1.0; n];
        let shifted = |deg: f64| -> Vec<f64> {
            base.iter().map(|&m| m + deg.to_radians()).collect()
        };
        let p_small =
            paired_circular_permutation_test(&shifted(2.0), &base, &weights, 2000, 5).unwrap();
        let p_small_again =
            paired_circular_permutation_test(&shifted(2.0), &base, &weights, 2000, 5).unwrap();
        assert_eq!(p_small, p_small_again);
        let p_large =
            paired_circular_permutation_test(&shifted(25.0), &base, &weights, 2000, 5).unwrap();
        assert!(p_large <= p_small, "{p_large} vs {p_small}");
    }

    #[test]
    fn permutation_test_rejects_bad_input() {
        assert!(paired_circular_permutation_test(&[0.1], &[0.2], &[1.0], 1000, 0).is_err());
        assert!(paired_circular_permutation_test(&[0.1, 0.2], &[0.2], &[1.0, 1.0], 1000, 0).is_err());
        assert!(
            paired_circular_permutation_test(&[0.1, 0.2], &[0.2, 0.3], &[1.0, 1.0], 10, 0).is_err()
        );
    }
}
