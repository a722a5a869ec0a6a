use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{fail, ErrorCode, Result};
use crate::trec_io::{QrelsStore, RunStore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgmentCounts {
    pub judged: usize,
    pub relevant: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QrelsDistribution {
    pub rel_threshold: i64,
    pub grade_histogram: BTreeMap<i64, usize>,
    pub per_query: BTreeMap<String, JudgmentCounts>,
    pub total_judgments: usize,
    pub total_relevant: usize,
}

pub fn qrels_distribution(qrels: &QrelsStore, rel_threshold: i64) -> QrelsDistribution {
    let mut grade_histogram = BTreeMap::new();
    let mut per_query = BTreeMap::new();
    for (qid, docs) in &qrels.judgments {
        for &g in docs.values() {
            *grade_histogram.entry(g).or_insert(0) += 1;
        }
        per_query.insert(
            qid.clone(),
            JudgmentCounts {
                judged: docs.len(),
                relevant: docs.values().filter(|&&g| g >= rel_threshold).count(),
            },
        );
    }
    QrelsDistribution {
        rel_threshold,
        total_judgments: grade_histogram.values().sum(),
        total_relevant: per_query.values().map(|c| c.relevant).sum(),
        grade_histogram,
        per_query,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SharedDocument {
    pub doc_id: String,
    pub qids: Vec<String>,
}

/// Documents relevant to at least `min_queries` queries, most shared first.
pub fn multi_query_documents(
    qrels: &QrelsStore,
    min_queries: usize,
    rel_threshold: i64,
) -> Result<Vec<SharedDocument>> {
    if min_queries < 2 {
        return fail(ErrorCode::InvalidParameter, "min_queries must be at least 2");
    }
    let mut by_doc: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    for (qid, docs) in &qrels.judgments {
        for (doc, &g) in docs {
            if g >= rel_threshold {
                by_doc.entry(doc).or_default().push(qid.clone());
            }
        }
    }
    let mut shared: Vec<SharedDocument> = by_doc
        .into_iter()
        .filter(|(_, qids)| qids.len() >= min_queries)
        .map(|(doc, qids)| SharedDocument {
            doc_id: doc.to_owned(),
            qids,
        })
        .collect();
    shared.sort_by(|a, b| b.qids.len().cmp(&a.qids.len()).then_with(|| a.doc_id.cmp(&b.doc_id)));
    Ok(shared)
}

/// Where one document sits in every run. `ranks[run][qid]` is `None` when the
/// run did not retrieve the document for a query in which it appears
/// elsewhere (in another run or in the qrels).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocRankTrace {
    pub doc_id: String,
    pub ranks: BTreeMap<String, BTreeMap<String, Option<usize>>>,
    pub judged_grades: BTreeMap<String, i64>,
}

pub fn document_rank_trace(doc_id: &str, runs: &[RunStore], qrels: &QrelsStore) -> Result<DocRankTrace> {
    if doc_id.is_empty() {
        return fail(ErrorCode::InvalidParameter, "doc_id must not be empty");
    }
    let judged_grades: BTreeMap<String, i64> = qrels
        .judgments
        .iter()
        .filter_map(|(q, docs)| docs.get(doc_id).map(|&g| (q.clone(), g)))
        .collect();
    let found: Vec<BTreeMap<String, usize>> = runs
        .iter()
        .map(|run| {
            run.rankings
                .iter()
                .filter_map(|(q, list)| {
                    list.iter()
                        .position(|d| d.doc_id == doc_id)
                        .map(|i| (q.clone(), i + 1))
                })
                .collect()
        })
        .collect();
    let mut qids: BTreeSet<&String> = judged_grades.keys().collect();
    qids.extend(found.iter().flat_map(BTreeMap::keys));
    if qids.is_empty() {
        return fail(
            ErrorCode::DocNotFound,
            format!("document {doc_id} is neither judged nor retrieved"),
        );
    }
    let ranks = runs
        .iter()
        .zip(&found)
        .map(|(run, hits)| {
            let per_query = qids.iter().map(|&q| (q.clone(), hits.get(q).copied())).collect();
            (run.run_id.clone(), per_query)
        })
        .collect();
    Ok(DocRankTrace {
        doc_id: doc_id.to_owned(),
        ranks,
        judged_grades,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn distribution() {
        let qrels = QrelsStore::from_triples([("q1", "d1", 2), ("q1", "d2", 0), ("q2", "d1", 1)]);
        let d = qrels_distribution(&qrels, 1);
        assert_eq!(d.grade_histogram, BTreeMap::from([(0, 1), (1, 1), (2, 1)]));
        assert_eq!(d.per_query["q1"], JudgmentCounts { judged: 2, relevant: 1 });
        assert_eq!(d.per_query["q2"], JudgmentCounts { judged: 1, relevant: 1 });
        assert_eq!(d.total_judgments, 3);

        let single = qrels_distribution(&QrelsStore::from_triples([("q", "d", 0)]), 1);
        assert_eq!(single.total_judgments, 1);
    }

    #[test]
    fn shared_documents() {
        let qrels = QrelsStore::from_triples([("q1", "d1", 1), ("q2", "d1", 2), ("q1", "d2", 1)]);
        assert_eq!(
            multi_query_documents(&qrels, 2, 1).unwrap(),
            [SharedDocument {
                doc_id: "d1".into(),
                qids: vec!["q1".into(), "q2".into()]
            }]
        );
        let lonely = QrelsStore::from_triples([("q1", "d1", 1), ("q2", "d2", 1)]);
        assert!(multi_query_documents(&lonely, 2, 1).unwrap().is_empty());
        assert_eq!(multi_query_documents(&qrels, 1, 1).unwrap_err().code, ErrorCode::InvalidParameter);
    }

    #[test]
    fn rank_trace() {
        let run = RunStore::from_triples("A", [("q1", "x", 3.0), ("q1", "y", 2.0), ("q1", "d", 1.0)]);
        let qrels = QrelsStore::from_triples([("q1", "d", 1), ("q2", "j", 2)]);
        let t = document_rank_trace("d", std::slice::from_ref(&run), &qrels).unwrap();
        assert_eq!(t.ranks["A"]["q1"], Some(3));

        let t = document_rank_trace("j", std::slice::from_ref(&run), &qrels).unwrap();
        assert_eq!(t.ranks["A"]["q2"], None);
        assert_eq!(t.judged_grades["q2"], 2);

        assert_eq!(
            document_rank_trace("zzz", &[run], &qrels).unwrap_err().code,
            ErrorCode::DocNotFound
        );
    }

    proptest! {
        #[test]
        fn shared_documents_match_brute_force(
            triples in prop::collection::vec((0u8..6, 0u8..8, 0i64..3), 1..100),
            min in 2usize..4,
        ) {
            let qrels = QrelsStore::from_triples(
                triples.iter().map(|(q, d, g)| (format!("q{q}"), format!("d{d}"), *g)),
            );
            let got = multi_query_documents(&qrels, min, 1).unwrap();
            for d in 0u8..8 {
                let doc = format!("d{d}");
                let count = qrels.judgments.values().filter(|m| m.get(&doc).is_some_and(|&g| g >= 1)).count();
                let listed = got.iter().find(|s| s.doc_id == doc);
                prop_assert_eq!(listed.is_some(), count >= min);
                if let Some(s) = listed {
                    prop_assert_eq!(s.qids.len(), count);
                }
            }
        }
    }
}
