use serde::{Deserialize, Serialize};

use crate::error::{fail, ErrorCode, Result};
use crate::measures::{EvalMatrix, MeasureSpec};

pub const DEFAULT_TIE_BAND: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryDelta {
    pub qid: String,
    pub baseline: f64,
    pub comparison: f64,
    pub delta: f64,
}

/// Per-query differences between two runs, largest gain first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryDeltaReport {
    pub baseline_run_id: String,
    pub comparison_run_id: String,
    pub measure: MeasureSpec,
    pub deltas: Vec<QueryDelta>,
    pub wins: usize,
    pub ties: usize,
    pub losses: usize,
    pub tie_band: f64,
}

pub fn per_query_delta(
    matrix: &EvalMatrix,
    baseline: &str,
    comparison: &str,
    measure: &MeasureSpec,
    tie_band: f64,
) -> Result<QueryDeltaReport> {
    if !(tie_band >= 0.0 && tie_band.is_finite()) {
        return fail(ErrorCode::InvalidParameter, "tie band must be a finite value >= 0");
    }
    let (qids, base) = matrix.run_scores(baseline, measure)?;
    let (_, cmp) = matrix.run_scores(comparison, measure)?;
    let mut deltas: Vec<QueryDelta> = qids
        .iter()
        .zip(base.iter().zip(cmp))
        .map(|(qid, (&b, &c))| QueryDelta {
            qid: qid.clone(),
            baseline: b,
            comparison: c,
            delta: c - b,
        })
        .collect();
    deltas.sort_by(|x, y| y.delta.total_cmp(&x.delta).then_with(|| x.qid.cmp(&y.qid)));
    let wins = deltas.iter().filter(|d| d.delta > tie_band).count();
    let losses = deltas.iter().filter(|d| d.delta < -tie_band).count();
    Ok(QueryDeltaReport {
        baseline_run_id: baseline.to_owned(),
        comparison_run_id: comparison.to_owned(),
        measure: *measure,
        ties: deltas.len() - wins - losses,
        deltas,
        wins,
        losses,
        tie_band,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{MeasureColumn, MissingQueryPolicy};
    use crate::measures::parse_measure_spec;

    fn matrix(base: [f64; 2], cmp: [f64; 2]) -> EvalMatrix {
        let measure = parse_measure_spec("AP").unwrap();
        EvalMatrix {
            run_ids: vec!["base".into(), "cmp".into()],
            policy: MissingQueryPolicy::ZeroFill,
            columns: vec![MeasureColumn {
                measure,
                eval_qids: vec!["q1".into(), "q2".into()],
                excluded_qids: vec![],
                scores: vec![base.to_vec(), cmp.to_vec()],
                means: vec![0.0, 0.0],
            }],
        }
    }

    #[test]
    fn win_and_tie() {
        let ap = parse_measure_spec("AP").unwrap();
        let r = per_query_delta(&matrix([0.2, 0.4], [0.5, 0.4]), "base", "cmp", &ap, DEFAULT_TIE_BAND).unwrap();
        assert_eq!(r.deltas[0].qid, "q1");
        assert!((r.deltas[0].delta - 0.3).abs() < 1e-12);
        assert_eq!(r.deltas[1].delta, 0.0);
        assert_eq!((r.wins, r.ties, r.losses), (1, 1, 0));
    }

    #[test]
    fn self_comparison_and_band() {
        let ap = parse_measure_spec("AP").unwrap();
        let m = matrix([0.2, 0.4], [0.23, 0.4]);
        let r = per_query_delta(&m, "base", "base", &ap, DEFAULT_TIE_BAND).unwrap();
        assert_eq!((r.wins, r.ties, r.losses), (0, 2, 0));
        let r = per_query_delta(&m, "base", "cmp", &ap, 0.05).unwrap();
        assert_eq!(r.ties, 2);
    }

    #[test]
    fn unknown_ids() {
        let ap = parse_measure_spec("AP").unwrap();
        let m = matrix([0.2, 0.4], [0.5, 0.4]);
        assert_eq!(per_query_delta(&m, "nope", "cmp", &ap, 0.0).unwrap_err().code, ErrorCode::UnknownRun);
        let p5 = parse_measure_spec("P@5").unwrap();
        assert_eq!(per_query_delta(&m, "base", "cmp", &p5, 0.0).unwrap_err().code, ErrorCode::UnknownMeasure);
    }
}
