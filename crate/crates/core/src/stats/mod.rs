//! Paired comparison of runs over per-query scores.

mod bootstrap;
mod correction;
mod significance;

use serde::{Deserialize, Serialize};

pub use bootstrap::bootstrap_ci;
pub use correction::{bonferroni_correction, correct, holm_correction, CorrectionMethod, CorrectionResult};
pub use significance::{
    paired_effect_size, paired_t_test, run_test, wilcoxon_signed_rank, TestMethod, TestResult,
    TestKind,
};

use crate::error::{fail, ErrorCode, Result};
use crate::measures::{EvalMatrix, MeasureSpec};

/// Two systems' scores aligned on the same queries. `a` is the system under
/// test, `b` the reference; differences are `a - b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedSample {
    pub qids: Vec<String>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl PairedSample {
    pub fn new(qids: Vec<String>, a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if a.len() != b.len() || a.len() != qids.len() {
            return fail(
                ErrorCode::InvalidInput,
                format!(
                    "paired sample lengths differ: {} qids, {} and {} scores",
                    qids.len(),
                    a.len(),
                    b.len()
                ),
            );
        }
        if a.iter().chain(&b).any(|v| !v.is_finite()) {
            return fail(ErrorCode::InvalidInput, "paired sample contains a non-finite value");
        }
        Ok(PairedSample { qids, a, b })
    }

    /// Builds a sample with anonymous qids; handy for raw score vectors.
    pub fn from_scores(a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        let qids = (1..=a.len()).map(|i| i.to_string()).collect();
        Self::new(qids, a, b)
    }

    /// Comparison run as `a`, baseline as `b`, over the measure's eval qids.
    pub fn from_matrix(
        matrix: &EvalMatrix,
        baseline: &str,
        comparison: &str,
        measure: &MeasureSpec,
    ) -> Result<Self> {
        let (qids, base) = matrix.run_scores(baseline, measure)?;
        let (_, cmp) = matrix.run_scores(comparison, measure)?;
        Self::new(qids.to_vec(), cmp.to_vec(), base.to_vec())
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn differences(&self) -> Vec<f64> {
        self.a.iter().zip(&self.b).map(|(x, y)| x - y).collect()
    }
}

/// Mean and sample standard deviation (n − 1 denominator).
pub(crate) fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.iter().all(|v| *v == values[0]) {
        return (values[0], 0.0);
    }
    let mean = compensated_sum(values.iter().copied()) / n;
    let ss = compensated_sum(values.iter().map(|v| (v - mean).powi(2)));
    (mean, (ss / (n - 1.0)).sqrt())
}

/// Neumaier-compensated summation.
pub(crate) fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut carry = 0.0;
    for v in values {
        let t = sum + v;
        carry += if sum.abs() >= v.abs() { (sum - t) + v } else { (v - t) + sum };
        sum = t;
    }
    sum + carry
}

/// 1-based ranks with ties sharing their average rank.
pub(crate) fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1 ..= end
        let avg = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    ranks
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranks_with_ties() {
        assert_eq!(average_ranks(&[5.0, 5.0]), [1.5, 1.5]);
        assert_eq!(average_ranks(&[3.0, 1.0, 2.0, 1.0]), [4.0, 1.5, 3.0, 1.5]);
    }

    #[test]
    fn sample_validation() {
        assert!(PairedSample::from_scores(vec![1.0], vec![1.0, 2.0]).is_err());
        assert!(PairedSample::from_scores(vec![f64::NAN], vec![1.0]).is_err());
    }
}
