use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::{
    finish_stats, is_column_name, raw_lines, IssueCode, ParseOutcome, Parsed, RawLine,
    ValidationReport, DOC_COLUMNS, QID_COLUMNS,
};
use crate::error::{fail, ErrorCode, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedDoc {
    pub doc_id: String,
    pub score: f64,
}

/// Canonical ranking order: score descending, then doc_id descending.
pub(crate) fn canonical_cmp(a: &RankedDoc, b: &RankedDoc) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| b.doc_id.cmp(&a.doc_id))
}

/// One experiment's rankings. Lists are unique by doc_id and kept in
/// canonical order; list position is the rank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunStore {
    pub run_id: String,
    pub rankings: BTreeMap<String, Vec<RankedDoc>>,
    pub max_depth: usize,
}

impl RunStore {
    /// Builds a store from unsorted `(qid, doc_id, score)` triples. Duplicate
    /// docs keep the higher score.
    pub fn from_triples<I, Q, D>(run_id: impl Into<String>, triples: I) -> Self
    where
        I: IntoIterator<Item = (Q, D, f64)>,
        Q: Into<String>,
        D: Into<String>,
    {
        let mut per_query: BTreeMap<String, HashMap<String, f64>> = BTreeMap::new();
        for (q, d, s) in triples {
            let slot = per_query.entry(q.into()).or_default();
            let d = d.into();
            match slot.get(&d) {
                Some(&old) if old >= s => {}
                _ => {
                    slot.insert(d, s);
                }
            }
        }
        let rankings = per_query
            .into_iter()
            .map(|(q, docs)| {
                let mut list: Vec<RankedDoc> = docs
                    .into_iter()
                    .map(|(doc_id, score)| RankedDoc { doc_id, score })
                    .collect();
                list.sort_by(canonical_cmp);
                (q, list)
            })
            .collect();
        Self::from_sorted(run_id.into(), rankings)
    }

    fn from_sorted(run_id: String, rankings: BTreeMap<String, Vec<RankedDoc>>) -> Self {
        let max_depth = rankings.values().map(Vec::len).max().unwrap_or(0);
        RunStore {
            run_id,
            rankings,
            max_depth,
        }
    }

    pub fn ranking(&self, qid: &str) -> Option<&[RankedDoc]> {
        self.rankings.get(qid).map(Vec::as_slice)
    }

    /// Doc ids for `qid` in canonical order; empty when the query is absent.
    pub fn doc_ids(&self, qid: &str) -> Vec<&str> {
        self.rankings
            .get(qid)
            .map(|l| l.iter().map(|d| d.doc_id.as_str()).collect())
            .unwrap_or_default()
    }

    pub fn qids(&self) -> impl Iterator<Item = &str> {
        self.rankings.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.rankings.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Six-column TREC text with ranks taken from list position.
    pub fn to_trec_string(&self) -> String {
        let mut out = String::new();
        for (q, list) in &self.rankings {
            for (i, d) in list.iter().enumerate() {
                out.push_str(&format!(
                    "{q} Q0 {} {} {} {}\n",
                    d.doc_id,
                    i + 1,
                    d.score,
                    self.run_id
                ));
            }
        }
        out
    }
}

/// Keeps the first `depth` documents of every ranking.
pub fn truncate_run(run: &RunStore, depth: usize) -> Result<RunStore> {
    if depth == 0 {
        return fail(ErrorCode::InvalidDepth, "depth must be at least 1");
    }
    let rankings = run
        .rankings
        .iter()
        .map(|(q, l)| (q.clone(), l.iter().take(depth).cloned().collect()))
        .collect();
    Ok(RunStore::from_sorted(run.run_id.clone(), rankings))
}

struct Line {
    doc: RankedDoc,
    rank: u64,
    line: usize,
}

/// Parses a six-column run file. Each distinct run tag yields its own store,
/// in order of first appearance.
pub fn parse_runs(raw: &[u8]) -> ParseOutcome<Vec<RunStore>> {
    let mut report = ValidationReport::new();
    let mut tags: Vec<String> = Vec::new();
    // tag → qid → doc_id → entry
    let mut grouped: HashMap<String, BTreeMap<String, HashMap<String, Line>>> = HashMap::new();
    let mut first_record = true;

    for line in raw_lines(raw) {
        report.stats.lines_read += 1;
        let (no, text) = match line {
            RawLine::Text(no, s) => (no, s),
            RawLine::BadUtf8(no) => {
                report.line_error(no, IssueCode::InvalidUtf8, "line is not valid UTF-8");
                continue;
            }
        };
        let cols: Vec<&str> = text.split_whitespace().collect();
        let is_first = std::mem::replace(&mut first_record, false);
        if cols.len() != 6 {
            report.line_error(
                no,
                IssueCode::WrongColumnCount,
                format!("expected 6 columns, found {}", cols.len()),
            );
            continue;
        }
        if is_first && is_column_name(cols[0], QID_COLUMNS) && is_column_name(cols[2], DOC_COLUMNS)
        {
            report.drop_warning(no, IssueCode::HeaderSkipped, "header row skipped");
            continue;
        }
        let rank = match cols[3].parse::<u64>() {
            Ok(r) if r >= 1 => r,
            _ => {
                report.line_error(
                    no,
                    IssueCode::InvalidRank,
                    format!("rank '{}' is not a positive integer", cols[3]),
                );
                continue;
            }
        };
        let score = match cols[4].parse::<f64>() {
            Ok(s) if s.is_finite() => s,
            Ok(_) => {
                report.line_error(
                    no,
                    IssueCode::NonFiniteScore,
                    format!("score '{}' is not finite", cols[4]),
                );
                continue;
            }
            Err(_) => {
                report.line_error(
                    no,
                    IssueCode::NonNumericScore,
                    format!("score '{}' is not a number", cols[4]),
                );
                continue;
            }
        };
        let (qid, doc_id, tag) = (cols[0], cols[2], cols[5]);
        if !grouped.contains_key(tag) {
            tags.push(tag.to_owned());
        }
        let docs = grouped
            .entry(tag.to_owned())
            .or_default()
            .entry(qid.to_owned())
            .or_default();
        let entry = Line {
            doc: RankedDoc {
                doc_id: doc_id.to_owned(),
                score,
            },
            rank,
            line: no,
        };
        match docs.get(doc_id) {
            Some(prev) if prev.doc.score >= score => {
                report.drop_warning(
                    no,
                    IssueCode::DuplicateDoc,
                    format!("{doc_id} repeated for {qid} in run {tag}; higher score kept"),
                );
            }
            Some(prev) => {
                report.drop_warning(
                    prev.line,
                    IssueCode::DuplicateDoc,
                    format!("{doc_id} repeated for {qid} in run {tag}; higher score kept"),
                );
                docs.insert(doc_id.to_owned(), entry);
            }
            None => {
                docs.insert(doc_id.to_owned(), entry);
            }
        }
    }

    if tags.len() > 1 {
        report.warn(
            None,
            IssueCode::MultipleRunTags,
            format!("file contains {} run tags: {}", tags.len(), tags.join(", ")),
        );
    }

    let mut runs = Vec::with_capacity(tags.len());
    let mut kept = 0;
    for tag in tags {
        let per_query = grouped.remove(&tag).unwrap_or_default();
        let mut mismatch = false;
        let mut rankings = BTreeMap::new();
        for (qid, docs) in per_query {
            let mut entries: Vec<Line> = docs.into_values().collect();
            entries.sort_by_key(|e| (e.rank, e.line));
            let by_rank: Vec<String> = entries.iter().map(|e| e.doc.doc_id.clone()).collect();
            let mut list: Vec<RankedDoc> = entries.into_iter().map(|e| e.doc).collect();
            list.sort_by(canonical_cmp);
            if list.iter().map(|d| &d.doc_id).ne(by_rank.iter()) {
                mismatch = true;
            }
            kept += list.len();
            rankings.insert(qid, list);
        }
        if mismatch {
            report.warn(
                None,
                IssueCode::RankOrderMismatch,
                format!("run {tag}: rank column disagrees with score order; score order used"),
            );
        }
        runs.push(RunStore::from_sorted(tag, rankings));
    }

    finish_stats(&mut report, kept);
    if report.is_ok() {
        Ok(Parsed {
            value: runs,
            report,
        })
    } else {
        Err(report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_line() {
        let p = parse_runs(b"q1 Q0 d42 1 12.5 bm25\n").unwrap();
        assert_eq!(p.value.len(), 1);
        let run = &p.value[0];
        assert_eq!(run.run_id, "bm25");
        assert_eq!(
            run.ranking("q1").unwrap(),
            &[RankedDoc {
                doc_id: "d42".into(),
                score: 12.5
            }]
        );
        assert!(p.report.is_empty());
    }

    #[test]
    fn resort_by_score_with_mismatch_warning() {
        let p = parse_runs(b"q1 Q0 low 1 1.0 r\nq1 Q0 high 2 2.0 r\n").unwrap();
        assert_eq!(p.value[0].doc_ids("q1"), ["high", "low"]);
        let mismatches = p
            .report
            .warnings
            .iter()
            .filter(|w| w.code == IssueCode::RankOrderMismatch)
            .count();
        assert_eq!(mismatches, 1);

        let p = parse_runs(b"q1 Q0 low 2 1.0 r\nq1 Q0 high 1 2.0 r\n").unwrap();
        assert_eq!(p.value[0].doc_ids("q1"), ["high", "low"]);
        assert!(!p.report.has_warning(IssueCode::RankOrderMismatch));
    }

    #[test]
    fn tied_scores_break_on_doc_id_descending() {
        let p = parse_runs(b"q1 Q0 a 1 1.0 r\nq1 Q0 b 2 1.0 r\n").unwrap();
        assert_eq!(p.value[0].doc_ids("q1"), ["b", "a"]);
    }

    #[test]
    fn multiple_tags() {
        let p = parse_runs(b"q1 Q0 d1 1 1 a\nq1 Q0 d1 1 1 b\n").unwrap();
        assert_eq!(p.value.len(), 2);
        assert_eq!(p.value[0].run_id, "a");
        assert_eq!(p.value[1].run_id, "b");
        assert!(p.report.has_warning(IssueCode::MultipleRunTags));
    }

    #[test]
    fn duplicate_doc_keeps_higher() {
        let p = parse_runs(b"q1 Q0 d1 1 1.0 r\nq1 Q0 d1 2 3.0 r\nq1 Q0 d1 3 2.0 r\n").unwrap();
        assert_eq!(p.value[0].ranking("q1").unwrap()[0].score, 3.0);
        assert_eq!(p.report.stats.records_kept, 1);
        assert_eq!(p.report.stats.records_dropped, 2);
        assert_eq!(p.report.stats.lines_read, 3);
    }

    #[test]
    fn bad_scores_are_rejected() {
        let r = parse_runs(b"q1 Q0 d1 1 abc r\nq1 Q0 d2 2 NaN r\nq1 Q0 d3 3 inf r\n").unwrap_err();
        let codes: Vec<_> = r.errors.iter().map(|i| i.code).collect();
        assert!(codes.contains(&IssueCode::NonNumericScore));
        assert_eq!(
            codes.iter().filter(|&&c| c == IssueCode::NonFiniteScore).count(),
            2
        );
        assert!(r.has_error(IssueCode::EmptyFile));
    }

    #[test]
    fn truncation() {
        let run = RunStore::from_triples("r", [("q", "a", 3.0), ("q", "b", 2.0), ("q", "c", 1.0)]);
        assert_eq!(truncate_run(&run, 2).unwrap().doc_ids("q"), ["a", "b"]);
        assert_eq!(truncate_run(&run, 10).unwrap(), run);
        assert_eq!(
            truncate_run(&run, 0).unwrap_err().code,
            ErrorCode::InvalidDepth
        );
    }
}
