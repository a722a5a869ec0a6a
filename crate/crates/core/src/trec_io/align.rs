use std::collections::BTreeSet;

use super::{IssueCode, QrelsStore, QuerySet, RunStore, ValidationReport};

/// Default grade at or above which a judgment counts as relevant.
pub const DEFAULT_REL_THRESHOLD: i64 = 1;

/// Cross-checks the three inputs. Only warnings are produced; evaluation
/// proceeds on the intersection rules of the measures module.
pub fn validate_alignment(
    queries: Option<&QuerySet>,
    qrels: &QrelsStore,
    runs: &[RunStore],
) -> ValidationReport {
    let mut report = ValidationReport::new();
    let qrels_qids: BTreeSet<&str> = qrels.qids().collect();

    if let Some(queries) = queries {
        for q in &qrels_qids {
            if !queries.contains(q) {
                report.warn(
                    None,
                    IssueCode::QrelsQidNotInQueries,
                    format!("qrels query {q} is not in the query file"),
                );
            }
        }
    }

    for run in runs {
        let run_qids: BTreeSet<&str> = run.qids().collect();
        for q in run_qids.difference(&qrels_qids) {
            report.warn(
                None,
                IssueCode::RunQidNotInQrels,
                format!("run {}: query {q} has no judgments", run.run_id),
            );
        }
        for q in qrels_qids.difference(&run_qids) {
            report.warn(
                None,
                IssueCode::RunMissingQid,
                format!("run {} is missing query {q}", run.run_id),
            );
        }
    }

    for q in &qrels_qids {
        if qrels.relevant_count(q, DEFAULT_REL_THRESHOLD) == 0 {
            report.warn(
                None,
                IssueCode::NoRelevantDocs,
                format!("query {q} has no document with grade >= {DEFAULT_REL_THRESHOLD}"),
            );
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trec_io::QueryRecord;

    fn queries(ids: &[&str]) -> QuerySet {
        QuerySet {
            records: ids
                .iter()
                .map(|q| QueryRecord {
                    qid: q.to_string(),
                    text: "t".into(),
                })
                .collect(),
        }
    }

    #[test]
    fn aligned_inputs_yield_empty_report() {
        let qrels = QrelsStore::from_triples([("q1", "d1", 1)]);
        let run = RunStore::from_triples("r", [("q1", "d1", 1.0)]);
        let r = validate_alignment(Some(&queries(&["q1"])), &qrels, &[run]);
        assert!(r.is_empty());
    }

    #[test]
    fn run_missing_qid() {
        let qrels = QrelsStore::from_triples([("q1", "d1", 1), ("q2", "d1", 1)]);
        let run = RunStore::from_triples("r", [("q1", "d1", 1.0)]);
        let r = validate_alignment(None, &qrels, &[run]);
        assert_eq!(r.warnings.len(), 1);
        assert_eq!(r.warnings[0].code, IssueCode::RunMissingQid);
        assert!(r.warnings[0].message.contains("q2"));
    }

    #[test]
    fn no_relevant_docs() {
        let qrels = QrelsStore::from_triples([("q1", "d1", 0)]);
        let run = RunStore::from_triples("r", [("q1", "d1", 1.0)]);
        let r = validate_alignment(None, &qrels, &[run]);
        assert!(r.has_warning(IssueCode::NoRelevantDocs));
        assert!(r.errors.is_empty());
    }

    #[test]
    fn qrels_not_in_queries_and_run_extra() {
        let qrels = QrelsStore::from_triples([("q1", "d1", 1), ("q9", "d1", 1)]);
        let run = RunStore::from_triples("r", [("q1", "d1", 1.0), ("q9", "d", 1.0), ("q5", "d", 1.0)]);
        let r = validate_alignment(Some(&queries(&["q1"])), &qrels, &[run]);
        assert!(r.has_warning(IssueCode::QrelsQidNotInQueries));
        assert!(r.has_warning(IssueCode::RunQidNotInQrels));
    }
}
