use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{fail, ErrorCode, Result};
use crate::measures::mean;

/// Minimum number of resamples accepted by [`bootstrap_ci`].
pub const MIN_ITERATIONS: usize = 100;

/// Resample `index` draws from its own ChaCha stream keyed by `(seed, index)`,
/// so the result does not depend on how resamples are scheduled.
fn resample_mean(scores: &[f64], seed: u64, index: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let n = scores.len();
    let sum: f64 = (0..n).map(|_| scores[rng.random_range(0..n)]).sum();
    sum / n as f64
}

/// Linear-interpolated quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Percentile bootstrap interval of the mean.
///
/// The interval is widened if needed so it always contains the sample mean.
pub fn bootstrap_ci(scores: &[f64], confidence: f64, iterations: usize, seed: u64) -> Result<(f64, f64)> {
    if scores.len() < 2 {
        return fail(ErrorCode::InsufficientData, "bootstrap needs at least 2 scores");
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return fail(
            ErrorCode::InvalidParameter,
            format!("confidence {confidence} outside (0, 1)"),
        );
    }
    if iterations < MIN_ITERATIONS {
        return fail(
            ErrorCode::InvalidParameter,
            format!("at least {MIN_ITERATIONS} iterations required"),
        );
    }
    let mut means: Vec<f64> = (0..iterations)
        .into_par_iter()
        .map(|i| resample_mean(scores, seed, i))
        .collect();
    means.sort_by(f64::total_cmp);
    let tail = (1.0 - confidence) / 2.0;
    let centre = mean(scores);
    let lower = quantile(&means, tail).min(centre);
    let upper = quantile(&means, 1.0 - tail).max(centre);
    Ok((lower, upper))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_scores() {
        let (lo, hi) = bootstrap_ci(&[0.4; 10], 0.95, 500, 1).unwrap();
        assert!((lo - 0.4).abs() < 1e-12 && (hi - 0.4).abs() < 1e-12);
    }

    #[test]
    fn deterministic_for_seed() {
        let scores: Vec<f64> = (0..30).map(|i| (i as f64 * 0.37).sin().abs()).collect();
        assert_eq!(
            bootstrap_ci(&scores, 0.9, 1000, 42).unwrap(),
            bootstrap_ci(&scores, 0.9, 1000, 42).unwrap()
        );
        assert_ne!(
            bootstrap_ci(&scores, 0.9, 1000, 42).unwrap(),
            bootstrap_ci(&scores, 0.9, 1000, 43).unwrap()
        );
    }

    #[test]
    fn alternating_scores_straddle_half() {
        let scores: Vec<f64> = (0..100).map(|i| (i % 2) as f64).collect();
        let (lo, hi) = bootstrap_ci(&scores, 0.95, 2000, 7).unwrap();
        assert!(lo < 0.5 && 0.5 < hi);
        assert!(hi - lo > 0.0);
    }

    #[test]
    fn wider_at_higher_confidence() {
        let scores: Vec<f64> = (0..40).map(|i| ((i * 7) % 11) as f64 / 10.0).collect();
        let mut last = 0.0;
        for c in [0.5, 0.8, 0.9, 0.95, 0.99] {
            let (lo, hi) = bootstrap_ci(&scores, c, 1000, 3).unwrap();
            assert!(hi - lo >= last);
            last = hi - lo;
        }
    }

    #[test]
    fn preconditions() {
        assert_eq!(bootstrap_ci(&[1.0], 0.95, 1000, 0).unwrap_err().code, ErrorCode::InsufficientData);
        assert_eq!(bootstrap_ci(&[1.0, 2.0], 1.0, 1000, 0).unwrap_err().code, ErrorCode::InvalidParameter);
        assert_eq!(bootstrap_ci(&[1.0, 2.0], 0.9, 10, 0).unwrap_err().code, ErrorCode::InvalidParameter);
    }
}
