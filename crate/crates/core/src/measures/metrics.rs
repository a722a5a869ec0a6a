//! Per-query effectiveness measures, following trec_eval conventions.
//!
//! Rankings are doc ids in canonical order. Documents absent from the
//! judgments are unjudged and count as non-relevant everywhere except bpref,
//! which ignores them.

use std::collections::BTreeMap;

use super::spec::{Family, Gain, MeasureSpec};
use crate::error::{fail, ErrorCode, Result};

/// Judgments for one query: doc_id → grade.
pub type Judgments = BTreeMap<String, i64>;

fn is_relevant(judged: &Judgments, doc: &str, threshold: i64) -> bool {
    judged.get(doc).is_some_and(|&g| g >= threshold)
}

fn relevant_total(judged: &Judgments, threshold: i64) -> usize {
    judged.values().filter(|&&g| g >= threshold).count()
}

fn require_relevant(judged: &Judgments, threshold: i64) -> Result<usize> {
    match relevant_total(judged, threshold) {
        0 => fail(
            ErrorCode::NoRelevantDocs,
            format!("query has no document with grade >= {threshold}"),
        ),
        r => Ok(r),
    }
}

fn require_cutoff(k: usize) -> Result<()> {
    if k == 0 {
        return fail(ErrorCode::InvalidCutoff, "cutoff must be positive");
    }
    Ok(())
}

pub fn average_precision(ranking: &[&str], judged: &Judgments, rel_threshold: i64) -> Result<f64> {
    let total = require_relevant(judged, rel_threshold)?;
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, doc) in ranking.iter().enumerate() {
        if is_relevant(judged, doc, rel_threshold) {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    Ok(sum / total as f64)
}

fn gain_of(grade: i64, gain: Gain) -> f64 {
    let g = grade.max(0) as f64;
    match gain {
        Gain::Linear => g,
        Gain::Exponential => g.exp2() - 1.0,
    }
}

fn dcg(gains: impl Iterator<Item = f64>) -> f64 {
    gains
        .enumerate()
        .map(|(i, g)| g / ((i + 2) as f64).log2())
        .sum()
}

/// nDCG with a `log2(rank + 1)` discount.
///
/// With a cutoff both the run and the ideal ranking are truncated at `k`.
/// Without one the whole run is scored against the full ideal ranking.
pub fn ndcg(ranking: &[&str], judged: &Judgments, k: Option<usize>, gain: Gain) -> Result<f64> {
    if let Some(k) = k {
        require_cutoff(k)?;
    }
    let mut ideal: Vec<i64> = judged.values().copied().filter(|&g| g > 0).collect();
    if ideal.is_empty() {
        return fail(ErrorCode::NoRelevantDocs, "query has no positively graded document");
    }
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let depth = k.unwrap_or(usize::MAX);
    let actual = dcg(
        ranking
            .iter()
            .take(depth)
            .map(|d| gain_of(judged.get(*d).copied().unwrap_or(0), gain)),
    );
    let best = dcg(ideal.iter().take(depth).map(|&g| gain_of(g, gain)));
    Ok(actual / best)
}

pub fn precision_at_k(ranking: &[&str], judged: &Judgments, k: usize, rel_threshold: i64) -> Result<f64> {
    require_cutoff(k)?;
    let hits = ranking
        .iter()
        .take(k)
        .filter(|d| is_relevant(judged, d, rel_threshold))
        .count();
    Ok(hits as f64 / k as f64)
}

pub fn recall_at_k(ranking: &[&str], judged: &Judgments, k: usize, rel_threshold: i64) -> Result<f64> {
    require_cutoff(k)?;
    let total = require_relevant(judged, rel_threshold)?;
    let hits = ranking
        .iter()
        .take(k)
        .filter(|d| is_relevant(judged, d, rel_threshold))
        .count();
    Ok(hits as f64 / total as f64)
}

pub fn reciprocal_rank(
    ranking: &[&str],
    judged: &Judgments,
    k: Option<usize>,
    rel_threshold: i64,
) -> Result<f64> {
    if let Some(k) = k {
        require_cutoff(k)?;
    }
    Ok(ranking
        .iter()
        .take(k.unwrap_or(usize::MAX))
        .position(|d| is_relevant(judged, d, rel_threshold))
        .map_or(0.0, |i| 1.0 / (i + 1) as f64))
}

/// Binary preference. Unjudged documents are skipped entirely; the
/// non-relevant count above a relevant document is capped at `min(R, N)`.
pub fn bpref(ranking: &[&str], judged: &Judgments, rel_threshold: i64) -> Result<f64> {
    let total_rel = require_relevant(judged, rel_threshold)?;
    let total_nonrel = judged.len() - total_rel;
    let denom = total_rel.min(total_nonrel);
    let mut nonrel_above = 0usize;
    let mut sum = 0.0;
    for doc in ranking {
        match judged.get(*doc) {
            Some(&g) if g >= rel_threshold => {
                sum += if denom == 0 {
                    1.0
                } else {
                    1.0 - nonrel_above.min(denom) as f64 / denom as f64
                };
            }
            Some(_) => nonrel_above += 1,
            None => {}
        }
    }
    Ok(sum / total_rel as f64)
}

/// Fraction of the top `k` positions holding a judged document.
pub fn judged_at_k(ranking: &[&str], judged: &Judgments, k: usize) -> Result<f64> {
    require_cutoff(k)?;
    let hits = ranking
        .iter()
        .take(k)
        .filter(|d| judged.contains_key(**d))
        .count();
    Ok(hits as f64 / k as f64)
}

/// Dispatches on the measure family.
pub fn compute(spec: &MeasureSpec, ranking: &[&str], judged: &Judgments) -> Result<f64> {
    let t = spec.rel_threshold;
    // families that require a cutoff were validated at construction
    let k = spec.cutoff.unwrap_or(0);
    match spec.family {
        Family::AP => average_precision(ranking, judged, t),
        Family::NDCG => ndcg(ranking, judged, spec.cutoff, spec.gain),
        Family::P => precision_at_k(ranking, judged, k, t),
        Family::R => recall_at_k(ranking, judged, k, t),
        Family::RR => reciprocal_rank(ranking, judged, spec.cutoff, t),
        Family::Bpref => bpref(ranking, judged, t),
        Family::Judged => judged_at_k(ranking, judged, k),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn judgments(pairs: &[(&str, i64)]) -> Judgments {
        pairs.iter().map(|(d, g)| (d.to_string(), *g)).collect()
    }

    #[test]
    fn ap_hand_fixture() {
        let j = judgments(&[("d1", 1), ("d3", 1)]);
        let ap = average_precision(&["d1", "d2", "d3"], &j, 1).unwrap();
        assert_abs_diff_eq!(ap, (1.0 + 2.0 / 3.0) / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ap, 0.833333, epsilon = 1e-6);
    }

    #[test]
    fn ap_edges() {
        let j = judgments(&[("a", 1), ("b", 2)]);
        assert_eq!(average_precision(&["a", "b"], &j, 1).unwrap(), 1.0);
        assert_eq!(average_precision(&["x", "y"], &j, 1).unwrap(), 0.0);
        let err = average_precision(&["a"], &judgments(&[("a", 0)]), 1).unwrap_err();
        assert_eq!(err.code, ErrorCode::NoRelevantDocs);
    }

    #[test]
    fn ndcg_hand_fixture() {
        let j = judgments(&[("a", 2), ("c", 1), ("b", 0)]);
        let v = ndcg(&["a", "b", "c"], &j, Some(3), Gain::Linear).unwrap();
        let idcg = 2.0 + 1.0 / 3f64.log2();
        assert_abs_diff_eq!(v, 2.5 / idcg, epsilon = 1e-12);
        assert_abs_diff_eq!(v, 0.950234, epsilon = 1e-6);
    }

    #[test]
    fn ndcg_edges() {
        let j = judgments(&[("a", 2), ("c", 1)]);
        assert_abs_diff_eq!(ndcg(&["a", "c"], &j, None, Gain::Exponential).unwrap(), 1.0);
        assert_eq!(ndcg(&["zz", "a"], &j, Some(1), Gain::Linear).unwrap(), 0.0);
        assert_eq!(
            ndcg(&["a"], &judgments(&[("a", 0)]), None, Gain::Linear).unwrap_err().code,
            ErrorCode::NoRelevantDocs
        );
    }

    #[test]
    fn precision_uses_k_denominator() {
        let j = judgments(&[("r1", 1), ("r2", 1), ("n1", 0)]);
        assert_eq!(precision_at_k(&["r1", "n1", "r2", "n2"], &j, 2, 1).unwrap(), 0.5);
        assert_abs_diff_eq!(precision_at_k(&["r1", "r2", "n1"], &j, 10, 1).unwrap(), 0.2);
        assert_eq!(precision_at_k(&[], &j, 5, 1).unwrap(), 0.0);
    }

    #[test]
    fn recall() {
        let j = judgments(&[("a", 1), ("b", 1), ("c", 1), ("d", 1)]);
        assert_eq!(recall_at_k(&["a", "x", "b", "y", "z"], &j, 5, 1).unwrap(), 0.5);
        assert_eq!(recall_at_k(&["a", "b", "c", "d"], &j, 4, 1).unwrap(), 1.0);
        assert_eq!(recall_at_k(&["a"], &j, 0, 1).unwrap_err().code, ErrorCode::InvalidCutoff);
    }

    #[test]
    fn rr() {
        let j = judgments(&[("c", 1)]);
        assert_abs_diff_eq!(reciprocal_rank(&["a", "b", "c"], &j, None, 1).unwrap(), 1.0 / 3.0);
        assert_eq!(reciprocal_rank(&["c"], &j, None, 1).unwrap(), 1.0);
        assert_eq!(reciprocal_rank(&["a", "b"], &j, None, 1).unwrap(), 0.0);
        assert_eq!(reciprocal_rank(&["a", "b", "c"], &j, Some(2), 1).unwrap(), 0.0);
    }

    #[test]
    fn bpref_hand_fixture() {
        let j = judgments(&[("r1", 1), ("r2", 1), ("n1", 0), ("n2", 0)]);
        assert_eq!(bpref(&["n1", "r1", "r2", "n2"], &j, 1).unwrap(), 0.5);
        assert_eq!(bpref(&["r1", "u", "r2", "n1", "n2"], &j, 1).unwrap(), 1.0);
        assert_eq!(bpref(&["n1", "n2"], &j, 1).unwrap(), 0.0);
        // no judged non-relevant documents
        assert_eq!(bpref(&["x", "r1"], &judgments(&[("r1", 1), ("r2", 1)]), 1).unwrap(), 0.5);
    }

    #[test]
    fn judged() {
        let j = judgments(&[("a", 0), ("b", 1), ("c", 2)]);
        assert_abs_diff_eq!(judged_at_k(&["a", "x", "b", "y", "c"], &j, 5).unwrap(), 0.6);
        assert_eq!(judged_at_k(&["a", "b"], &j, 2).unwrap(), 1.0);
        assert_eq!(judged_at_k(&[], &j, 3).unwrap(), 0.0);
    }
}
