use serde::{Deserialize, Serialize};

use crate::error::{fail, ErrorCode, Result};
use crate::trec_io::{QrelsStore, RunStore};

pub const RECALL_LEVELS: usize = 11;

// recall values that land on a level up to rounding still count as reaching it
const LEVEL_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CurveScope {
    PerQuery { qid: String },
    Averaged,
}

/// Eleven-point interpolated precision-recall curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PRCurve {
    pub scope: CurveScope,
    pub recall_levels: Vec<f64>,
    pub precision: Vec<f64>,
    /// Uninterpolated (recall, precision) at each relevant retrieved rank.
    /// Empty for the averaged curve.
    pub raw_points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PRCurves {
    pub run_id: String,
    pub rel_threshold: i64,
    pub per_query: Vec<PRCurve>,
    pub averaged: PRCurve,
}

pub fn recall_levels() -> Vec<f64> {
    (0..RECALL_LEVELS).map(|i| i as f64 / 10.0).collect()
}

fn interpolate(points: &[(f64, f64)]) -> Vec<f64> {
    recall_levels()
        .into_iter()
        .map(|level| {
            points
                .iter()
                .filter(|(r, _)| r + LEVEL_SLACK >= level)
                .map(|&(_, p)| p)
                .fold(0.0, f64::max)
        })
        .collect()
}

/// Per-query and averaged interpolated curves. The average runs over every
/// judged query with at least one relevant document; queries the run did not
/// answer contribute zeros.
pub fn interpolated_pr_curve(run: &RunStore, qrels: &QrelsStore, rel_threshold: i64) -> Result<PRCurves> {
    let mut per_query = Vec::new();
    for (qid, judged) in &qrels.judgments {
        let total = judged.values().filter(|&&g| g >= rel_threshold).count();
        if total == 0 {
            continue;
        }
        let mut hits = 0usize;
        let mut points = Vec::new();
        for (i, doc) in run.doc_ids(qid).into_iter().enumerate() {
            if judged.get(doc).is_some_and(|&g| g >= rel_threshold) {
                hits += 1;
                points.push((hits as f64 / total as f64, hits as f64 / (i + 1) as f64));
            }
        }
        per_query.push(PRCurve {
            scope: CurveScope::PerQuery { qid: qid.clone() },
            recall_levels: recall_levels(),
            precision: interpolate(&points),
            raw_points: points,
        });
    }
    if per_query.is_empty() {
        return fail(
            ErrorCode::NoEvaluableQueries,
            format!("no query has a document with grade >= {rel_threshold}"),
        );
    }
    let n = per_query.len() as f64;
    let precision = (0..RECALL_LEVELS)
        .map(|i| per_query.iter().map(|c| c.precision[i]).sum::<f64>() / n)
        .collect();
    Ok(PRCurves {
        run_id: run.run_id.clone(),
        rel_threshold,
        per_query,
        averaged: PRCurve {
            scope: CurveScope::Averaged,
            recall_levels: recall_levels(),
            precision,
            raw_points: Vec::new(),
        },
    })
}
