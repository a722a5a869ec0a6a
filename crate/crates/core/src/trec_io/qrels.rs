use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{
    finish_stats, is_column_name, raw_lines, IssueCode, ParseOutcome, Parsed, RawLine,
    ValidationReport, DOC_COLUMNS, QID_COLUMNS, REL_COLUMNS,
};

/// Graded relevance judgments: qid → doc_id → grade.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QrelsStore {
    pub judgments: BTreeMap<String, BTreeMap<String, i64>>,
    pub grade_range: (i64, i64),
}

impl QrelsStore {
    /// Builds a store from triples; later duplicates overwrite earlier ones.
    pub fn from_triples<I, Q, D>(triples: I) -> Self
    where
        I: IntoIterator<Item = (Q, D, i64)>,
        Q: Into<String>,
        D: Into<String>,
    {
        let mut judgments: BTreeMap<String, BTreeMap<String, i64>> = BTreeMap::new();
        for (q, d, g) in triples {
            judgments.entry(q.into()).or_default().insert(d.into(), g);
        }
        let grade_range = grade_range(&judgments);
        QrelsStore {
            judgments,
            grade_range,
        }
    }

    pub fn query(&self, qid: &str) -> Option<&BTreeMap<String, i64>> {
        self.judgments.get(qid)
    }

    pub fn grade(&self, qid: &str, doc_id: &str) -> Option<i64> {
        self.judgments.get(qid)?.get(doc_id).copied()
    }

    pub fn qids(&self) -> impl Iterator<Item = &str> {
        self.judgments.keys().map(String::as_str)
    }

    /// Count of documents with `grade >= threshold` for `qid`.
    pub fn relevant_count(&self, qid: &str, threshold: i64) -> usize {
        self.judgments
            .get(qid)
            .map_or(0, |m| m.values().filter(|&&g| g >= threshold).count())
    }

    pub fn total_judgments(&self) -> usize {
        self.judgments.values().map(BTreeMap::len).sum()
    }

    /// `qid 0 doc_id grade` lines in store order.
    pub fn to_trec_string(&self) -> String {
        let mut out = String::new();
        for (q, docs) in &self.judgments {
            for (d, g) in docs {
                out.push_str(&format!("{q} 0 {d} {g}\n"));
            }
        }
        out
    }
}

fn grade_range(judgments: &BTreeMap<String, BTreeMap<String, i64>>) -> (i64, i64) {
    let mut grades = judgments.values().flat_map(|m| m.values().copied());
    match grades.next() {
        Some(first) => grades.fold((first, first), |(lo, hi), g| (lo.min(g), hi.max(g))),
        None => (0, 0),
    }
}

/// Parses a `qid iter doc_id grade` file. Duplicate pairs keep the last grade.
pub fn parse_qrels(raw: &[u8]) -> ParseOutcome<QrelsStore> {
    let mut report = ValidationReport::new();
    let mut judgments: BTreeMap<String, BTreeMap<String, i64>> = BTreeMap::new();
    // (qid, doc) → line that currently holds the pair
    let mut holder: BTreeMap<(String, String), usize> = BTreeMap::new();
    let mut first_record = true;
    let mut malformed = 0usize;

    for line in raw_lines(raw) {
        report.stats.lines_read += 1;
        let (no, text) = match line {
            RawLine::Text(no, s) => (no, s),
            RawLine::BadUtf8(no) => {
                malformed += 1;
                report.line_error(no, IssueCode::InvalidUtf8, "line is not valid UTF-8");
                continue;
            }
        };
        let cols: Vec<&str> = text.split_whitespace().collect();
        let is_first = std::mem::replace(&mut first_record, false);
        if cols.len() != 4 {
            malformed += 1;
            report.line_error(
                no,
                IssueCode::WrongColumnCount,
                format!("expected 4 columns, found {}", cols.len()),
            );
            continue;
        }
        if is_first
            && is_column_name(cols[0], QID_COLUMNS)
            && (is_column_name(cols[2], DOC_COLUMNS) || is_column_name(cols[3], REL_COLUMNS))
        {
            report.drop_warning(no, IssueCode::HeaderSkipped, "header row skipped");
            continue;
        }
        let grade: i64 = match cols[3].parse() {
            Ok(g) => g,
            Err(_) => {
                malformed += 1;
                report.line_error(
                    no,
                    IssueCode::NonIntegerGrade,
                    format!("grade '{}' is not an integer", cols[3]),
                );
                continue;
            }
        };
        let (qid, doc) = (cols[0].to_owned(), cols[2].to_owned());
        if let Some(prev) = holder.insert((qid.clone(), doc.clone()), no) {
            report.drop_warning(
                prev,
                IssueCode::DuplicateJudgment,
                format!("({qid}, {doc}) judged again on line {no}; last judgment kept"),
            );
        }
        judgments.entry(qid).or_default().insert(doc, grade);
    }

    let kept = holder.len();
    finish_stats(&mut report, kept);
    if kept > 0 && malformed * 2 > report.stats.lines_read {
        report.file_error(
            IssueCode::MalformedFile,
            format!(
                "{malformed} of {} lines malformed; is this a qrels file?",
                report.stats.lines_read
            ),
        );
    }
    if !report.is_ok() {
        return Err(report);
    }
    let grade_range = grade_range(&judgments);
    Ok(Parsed {
        value: QrelsStore {
            judgments,
            grade_range,
        },
        report,
    })
}
