use serde::{Deserialize, Serialize};

use super::correlation::{correlation, Correlation, CorrelationMethod};
use crate::error::{fail, Error, ErrorCode, Result};
use crate::measures::{mean, EvalMatrix, MeasureSpec};
use crate::trec_io::{Issue, IssueCode, QuerySet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryLengthPoint {
    pub qid: String,
    pub tokens: usize,
    pub chars: usize,
    pub score: f64,
}

/// One equal-frequency bucket. `upper` is inclusive; `lower` is the smallest
/// member length (absent for an empty bucket).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthBucket {
    pub lower: Option<usize>,
    pub upper: usize,
    pub qids: Vec<String>,
    pub mean_score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthAnalysis {
    pub run_id: String,
    pub measure: MeasureSpec,
    pub points: Vec<QueryLengthPoint>,
    pub buckets: Vec<LengthBucket>,
    pub pearson: Option<Correlation>,
    pub spearman: Option<Correlation>,
    /// Why correlations are missing, when they are.
    pub correlation_error: Option<Error>,
    pub warnings: Vec<Issue>,
}

pub fn token_length(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Relates query length (whitespace tokens) to per-query effectiveness.
///
/// Queries are split into `n_buckets` equal-frequency buckets; a bucket's
/// upper bound is the length at its quantile position, and each query goes to
/// the first bucket whose bound covers it, so ties land in the lower bucket.
pub fn query_length_analysis(
    queries: &QuerySet,
    matrix: &EvalMatrix,
    run_id: &str,
    measure: &MeasureSpec,
    n_buckets: usize,
) -> Result<LengthAnalysis> {
    if n_buckets < 2 {
        return fail(ErrorCode::InvalidParameter, "at least 2 buckets are required");
    }
    let (qids, scores) = matrix.run_scores(run_id, measure)?;
    let mut warnings = Vec::new();
    let mut points = Vec::new();
    for (qid, &score) in qids.iter().zip(scores) {
        match queries.get(qid) {
            Some(rec) => points.push(QueryLengthPoint {
                qid: qid.clone(),
                tokens: token_length(&rec.text),
                chars: rec.text.chars().count(),
                score,
            }),
            None => warnings.push(Issue {
                line: None,
                code: IssueCode::QueryNotInQuerySet,
                message: format!("query {qid} has scores but no text; excluded"),
                dropped: true,
            }),
        }
    }
    if points.len() < n_buckets {
        return fail(
            ErrorCode::InsufficientData,
            format!("{} matched queries for {n_buckets} buckets", points.len()),
        );
    }

    let mut sorted: Vec<usize> = points.iter().map(|p| p.tokens).collect();
    sorted.sort_unstable();
    let n = sorted.len();
    let uppers: Vec<usize> = (1..=n_buckets)
        .map(|b| sorted[(b * n).div_ceil(n_buckets) - 1])
        .collect();
    let mut members: Vec<Vec<&QueryLengthPoint>> = vec![Vec::new(); n_buckets];
    for p in &points {
        let b = uppers.iter().position(|&u| p.tokens <= u).unwrap_or(n_buckets - 1);
        members[b].push(p);
    }
    let buckets: Vec<LengthBucket> = members
        .iter()
        .zip(&uppers)
        .map(|(m, &upper)| {
            let scores: Vec<f64> = m.iter().map(|p| p.score).collect();
            LengthBucket {
                lower: m.iter().map(|p| p.tokens).min(),
                upper,
                qids: m.iter().map(|p| p.qid.clone()).collect(),
                mean_score: (!scores.is_empty()).then(|| mean(&scores)),
            }
        })
        .collect();
    let empty = buckets.iter().filter(|b| b.qids.is_empty()).count();
    if empty > 0 {
        warnings.push(Issue {
            line: None,
            code: IssueCode::EmptyBucket,
            message: format!("{empty} of {n_buckets} buckets are empty because of tied lengths"),
            dropped: false,
        });
    }

    let lengths: Vec<f64> = points.iter().map(|p| p.tokens as f64).collect();
    let values: Vec<f64> = points.iter().map(|p| p.score).collect();
    let (pearson, spearman, correlation_error) = match (
        correlation(&lengths, &values, CorrelationMethod::Pearson),
        correlation(&lengths, &values, CorrelationMethod::Spearman),
    ) {
        (Ok(p), Ok(s)) => (Some(p), Some(s), None),
        (Err(e), _) | (_, Err(e)) => (None, None, Some(e)),
    };

    Ok(LengthAnalysis {
        run_id: run_id.to_owned(),
        measure: *measure,
        points,
        buckets,
        pearson,
        spearman,
        correlation_error,
        warnings,
    })
}
