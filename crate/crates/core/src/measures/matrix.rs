use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{compute, Judgments};
use super::spec::MeasureSpec;
use crate::error::{fail, ErrorCode, Result};
use crate::trec_io::{QrelsStore, RunStore};

/// What happens to a query a run did not answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingQueryPolicy {
    /// The run scores 0 on the missing query.
    #[default]
    ZeroFill,
    /// Only queries answered by every run are averaged.
    Intersect,
}

impl std::str::FromStr for MissingQueryPolicy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "zero_fill" | "zerofill" => Ok(Self::ZeroFill),
            "intersect" => Ok(Self::Intersect),
            other => Err(format!("unknown missing-query policy '{other}'")),
        }
    }
}

/// Scores of every run for one measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureColumn {
    pub measure: MeasureSpec,
    /// Queries averaged for this measure, ascending.
    pub eval_qids: Vec<String>,
    /// Judged queries without a relevant document at this measure's threshold.
    pub excluded_qids: Vec<String>,
    /// `scores[run][i]` is the score on `eval_qids[i]`.
    pub scores: Vec<Vec<f64>>,
    pub means: Vec<f64>,
}

/// Runs × measures × queries score tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalMatrix {
    pub run_ids: Vec<String>,
    pub policy: MissingQueryPolicy,
    pub columns: Vec<MeasureColumn>,
}

impl EvalMatrix {
    pub fn measures(&self) -> impl Iterator<Item = &MeasureSpec> {
        self.columns.iter().map(|c| &c.measure)
    }

    pub fn run_index(&self, run_id: &str) -> Option<usize> {
        self.run_ids.iter().position(|r| r == run_id)
    }

    pub fn measure_index(&self, measure: &MeasureSpec) -> Option<usize> {
        self.columns.iter().position(|c| &c.measure == measure)
    }

    pub fn column(&self, measure: &MeasureSpec) -> Option<&MeasureColumn> {
        self.columns.iter().find(|c| &c.measure == measure)
    }

    /// Union of the per-measure evaluation sets, ascending.
    pub fn eval_qids(&self) -> Vec<String> {
        self.columns
            .iter()
            .flat_map(|c| c.eval_qids.iter().cloned())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    pub fn score(&self, run_id: &str, measure: &MeasureSpec, qid: &str) -> Option<f64> {
        let r = self.run_index(run_id)?;
        let col = self.column(measure)?;
        let i = col.eval_qids.iter().position(|q| q == qid)?;
        Some(col.scores[r][i])
    }

    pub fn mean(&self, run_id: &str, measure: &MeasureSpec) -> Option<f64> {
        let r = self.run_index(run_id)?;
        Some(self.column(measure)?.means[r])
    }

    /// Per-query scores of one run for one measure, aligned with the column's
    /// `eval_qids`.
    pub fn run_scores(&self, run_id: &str, measure: &MeasureSpec) -> Result<(&[String], &[f64])> {
        let Some(r) = self.run_index(run_id) else {
            return fail(ErrorCode::UnknownRun, format!("run '{run_id}' is not in the matrix"));
        };
        let Some(col) = self.column(measure) else {
            return fail(
                ErrorCode::UnknownMeasure,
                format!("measure '{measure}' is not in the matrix"),
            );
        };
        Ok((&col.eval_qids, &col.scores[r]))
    }
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Scores every run on every measure.
pub fn evaluate(
    runs: &[RunStore],
    qrels: &QrelsStore,
    specs: &[MeasureSpec],
    policy: MissingQueryPolicy,
) -> Result<EvalMatrix> {
    evaluate_with(runs, qrels, specs, policy, true)
}

/// As [`evaluate`], choosing whether cells are computed on the rayon pool.
/// The output does not depend on that choice.
pub fn evaluate_with(
    runs: &[RunStore],
    qrels: &QrelsStore,
    specs: &[MeasureSpec],
    policy: MissingQueryPolicy,
    parallel: bool,
) -> Result<EvalMatrix> {
    if runs.is_empty() {
        return fail(ErrorCode::MissingInputs, "at least one run is required");
    }
    if specs.is_empty() {
        return fail(ErrorCode::UnknownMeasure, "at least one measure is required");
    }
    let empty = Judgments::new();
    let answered_by_all: BTreeSet<&str> = runs
        .iter()
        .map(|r| r.qids().collect::<BTreeSet<_>>())
        .reduce(|a, b| a.intersection(&b).copied().collect())
        .unwrap_or_default();

    let mut columns = Vec::with_capacity(specs.len());
    for spec in specs {
        let (mut eval_qids, mut excluded_qids) = (Vec::new(), Vec::new());
        for qid in qrels.qids() {
            if qrels.relevant_count(qid, spec.rel_threshold) == 0 {
                excluded_qids.push(qid.to_owned());
            } else if policy == MissingQueryPolicy::ZeroFill || answered_by_all.contains(qid) {
                eval_qids.push(qid.to_owned());
            }
        }
        if eval_qids.is_empty() {
            return fail(
                ErrorCode::NoEvaluableQueries,
                format!("no query has a relevant document for {spec}"),
            );
        }

        let cell = |run: &RunStore, qid: &String| -> Result<f64> {
            let judged = qrels.query(qid).unwrap_or(&empty);
            compute(spec, &run.doc_ids(qid), judged)
        };
        let run_scores = |run: &RunStore| -> Result<Vec<f64>> {
            eval_qids.iter().map(|q| cell(run, q)).collect()
        };
        let scores: Vec<Vec<f64>> = if parallel {
            runs.par_iter().map(run_scores).collect::<Result<_>>()?
        } else {
            runs.iter().map(run_scores).collect::<Result<_>>()?
        };
        let means = scores.iter().map(|s| mean(s)).collect();
        columns.push(MeasureColumn {
            measure: *spec,
            eval_qids,
            excluded_qids,
            scores,
            means,
        });
    }

    Ok(EvalMatrix {
        run_ids: runs.iter().map(|r| r.run_id.clone()).collect(),
        policy,
        columns,
    })
}
