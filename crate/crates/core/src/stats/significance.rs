use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use super::{average_ranks, mean_sd, PairedSample};
use crate::error::{fail, ErrorCode, Result};

/// Which paired test to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    #[default]
    TTest,
    Wilcoxon,
}

impl std::str::FromStr for TestKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "t" | "ttest" | "t_test" | "paired_t" => Ok(TestKind::TTest),
            "wilcoxon" | "signed_rank" => Ok(TestKind::Wilcoxon),
            other => Err(format!("unknown test '{other}'")),
        }
    }
}

/// How a p-value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMethod {
    TTest,
    WilcoxonExact,
    WilcoxonNormal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n_effective: usize,
    pub method: TestMethod,
}

fn require_pairs(sample: &PairedSample) -> Result<()> {
    if sample.len() < 2 {
        return fail(
            ErrorCode::InsufficientData,
            format!("need at least 2 pairs, got {}", sample.len()),
        );
    }
    Ok(())
}

/// Two-sided paired t-test on `a - b`.
///
/// Identical systems give `t = 0, p = 1`. Constant nonzero differences have
/// zero spread; the statistic saturates at `±f64::MAX` with `p = 0`.
pub fn paired_t_test(sample: &PairedSample) -> Result<TestResult> {
    require_pairs(sample)?;
    let d = sample.differences();
    let n = d.len();
    let (mean, sd) = mean_sd(&d);
    let (statistic, p_value) = if sd == 0.0 {
        if mean == 0.0 {
            (0.0, 1.0)
        } else {
            (f64::MAX.copysign(mean), 0.0)
        }
    } else {
        let t = mean / (sd / (n as f64).sqrt());
        let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("df >= 1");
        (t, (2.0 * dist.sf(t.abs())).clamp(0.0, 1.0))
    };
    Ok(TestResult {
        statistic,
        p_value,
        n_effective: n,
        method: TestMethod::TTest,
    })
}

/// Largest zero-free sample for which the exact null distribution is used.
pub const WILCOXON_EXACT_MAX_N: usize = 25;

/// Number of sign assignments of ranks `1..=n` whose positive-rank sum is `w`,
/// for every `w` in `0..=n(n+1)/2`.
fn signed_rank_counts(n: usize) -> Vec<f64> {
    let max = n * (n + 1) / 2;
    let mut counts = vec![0.0; max + 1];
    counts[0] = 1.0;
    for rank in 1..=n {
        for w in (rank..=max).rev() {
            counts[w] += counts[w - rank];
        }
    }
    counts
}

/// Wilcoxon signed-rank test on `a - b`.
///
/// Zero differences are dropped. Without ties and for at most
/// [`WILCOXON_EXACT_MAX_N`] remaining pairs the two-sided p-value is exact;
/// otherwise a normal approximation with tie and continuity corrections is
/// used. The reported statistic is `min(W+, W-)`.
pub fn wilcoxon_signed_rank(sample: &PairedSample) -> Result<TestResult> {
    require_pairs(sample)?;
    let nonzero: Vec<f64> = sample
        .differences()
        .into_iter()
        .filter(|&d| d != 0.0)
        .collect();
    let n = nonzero.len();
    if n == 0 {
        return Ok(TestResult {
            statistic: 0.0,
            p_value: 1.0,
            n_effective: 0,
            method: TestMethod::WilcoxonExact,
        });
    }
    let magnitudes: Vec<f64> = nonzero.iter().map(|d| d.abs()).collect();
    let ranks = average_ranks(&magnitudes);
    let w_plus: f64 = ranks
        .iter()
        .zip(&nonzero)
        .filter(|(_, &d)| d > 0.0)
        .map(|(r, _)| r)
        .sum();
    let total = (n * (n + 1)) as f64 / 2.0;
    let w = w_plus.min(total - w_plus);

    let mut sorted = magnitudes.clone();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        tie_term += t * t * t - t;
        i = j;
    }

    if tie_term == 0.0 && n <= WILCOXON_EXACT_MAX_N {
        let counts = signed_rank_counts(n);
        let tail: f64 = counts[..=(w as usize)].iter().sum();
        let p = (2.0 * tail / 2f64.powi(n as i32)).min(1.0);
        return Ok(TestResult {
            statistic: w,
            p_value: p,
            n_effective: n,
            method: TestMethod::WilcoxonExact,
        });
    }

    let nf = n as f64;
    let mu = nf * (nf + 1.0) / 4.0;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    let z = ((w_plus - mu).abs() - 0.5).max(0.0) / var.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    Ok(TestResult {
        statistic: w,
        p_value: (2.0 * normal.sf(z)).clamp(0.0, 1.0),
        n_effective: n,
        method: TestMethod::WilcoxonNormal,
    })
}

pub fn run_test(kind: TestKind, sample: &PairedSample) -> Result<TestResult> {
    match kind {
        TestKind::TTest => paired_t_test(sample),
        TestKind::Wilcoxon => wilcoxon_signed_rank(sample),
    }
}

/// Cohen's d for paired data: `mean(d) / sd(d)`.
pub fn paired_effect_size(sample: &PairedSample) -> Result<f64> {
    require_pairs(sample)?;
    let (mean, sd) = mean_sd(&sample.differences());
    if sd == 0.0 {
        return fail(ErrorCode::ZeroVariance, "differences have zero variance");
    }
    Ok(mean / sd)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn diffs(d: &[f64]) -> PairedSample {
        PairedSample::from_scores(d.to_vec(), vec![0.0; d.len()]).unwrap()
    }

    #[test]
    fn t_test_identical() {
        let s = PairedSample::from_scores(vec![0.3, 0.5, 0.9], vec![0.3, 0.5, 0.9]).unwrap();
        let r = paired_t_test(&s).unwrap();
        assert_eq!((r.statistic, r.p_value), (0.0, 1.0));
    }

    #[test]
    fn t_test_hand_fixture() {
        let r = paired_t_test(&diffs(&[0.1, 0.1, 0.1, -0.1])).unwrap();
        assert_abs_diff_eq!(r.statistic, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.p_value, 0.391, epsilon = 1e-3);
    }

    #[test]
    fn t_test_single_pair() {
        let err = paired_t_test(&diffs(&[0.1])).unwrap_err();
        assert_eq!(err.code, ErrorCode::InsufficientData);
    }

    #[test]
    fn wilcoxon_small_exact() {
        let r = wilcoxon_signed_rank(&diffs(&[1.0, 2.0, 3.0])).unwrap();
        assert_eq!(r.method, TestMethod::WilcoxonExact);
        assert_eq!(r.statistic, 0.0);
        assert_abs_diff_eq!(r.p_value, 0.25, epsilon = 1e-15);
    }

    #[test]
    fn wilcoxon_all_zero() {
        let r = wilcoxon_signed_rank(&diffs(&[0.0, 0.0, 0.0])).unwrap();
        assert_eq!((r.p_value, r.n_effective), (1.0, 0));
        assert_eq!(r.method, TestMethod::WilcoxonExact);
    }

    #[test]
    fn wilcoxon_ties_use_normal_branch() {
        let r = wilcoxon_signed_rank(&diffs(&[5.0, -5.0])).unwrap();
        assert_eq!(r.method, TestMethod::WilcoxonNormal);
        assert_eq!(r.statistic, 1.5);
        // W+ equals its null mean, so the continuity-corrected z is 0
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn wilcoxon_large_sample_uses_normal_branch() {
        let d: Vec<f64> = (1..=30).map(|i| i as f64 * if i % 3 == 0 { -1.0 } else { 1.0 }).collect();
        let r = wilcoxon_signed_rank(&diffs(&d)).unwrap();
        assert_eq!(r.method, TestMethod::WilcoxonNormal);
        // W- = 3 + 6 + ... + 30 = 165, W+ = 300, mu = 232.5, var = 2363.75
        let z: f64 = (67.5 - 0.5) / 2363.75f64.sqrt();
        assert_eq!(r.statistic, 165.0);
        assert!(r.p_value > 0.15 && r.p_value < 0.2, "z = {z}, p = {}", r.p_value);
    }

    #[test]
    fn effect_size() {
        assert_abs_diff_eq!(
            paired_effect_size(&diffs(&[0.1, 0.1, 0.1, -0.1])).unwrap(),
            0.5,
            epsilon = 1e-12
        );
        assert_eq!(
            paired_effect_size(&diffs(&[0.0, 0.0])).unwrap_err().code,
            ErrorCode::ZeroVariance
        );
        assert_eq!(
            paired_effect_size(&diffs(&[0.2, 0.2, 0.2])).unwrap_err().code,
            ErrorCode::ZeroVariance
        );
    }

    #[test]
    fn dp_counts_small() {
        // n = 3: sums 0..6 → 1,1,1,2,1,1,1
        assert_eq!(signed_rank_counts(3), [1.0, 1.0, 1.0, 2.0, 1.0, 1.0, 1.0]);
    }
}
