//! Parsing, validation and canonicalization of TREC-style inputs.
//!
//! Three files drive every analysis: a query (topic) file, a qrels file with
//! graded judgments and one or more run files. Parsers never panic on bad
//! input; every dropped line is accounted for in a [`ValidationReport`].

mod align;
mod qrels;
mod queries;
mod report;
mod runs;

pub use align::{validate_alignment, DEFAULT_REL_THRESHOLD};
pub use qrels::{parse_qrels, QrelsStore};
pub use queries::{parse_queries, QueryFormat, QueryRecord, QuerySet};
pub use report::{Issue, IssueCode, ParseOutcome, ParseStats, Parsed, ValidationReport};
pub use runs::{parse_runs, truncate_run, RankedDoc, RunStore};

/// Header synonyms for the query-id column.
pub(crate) const QID_COLUMNS: &[&str] = &["qid", "query_id", "topic", "topic_id"];
/// Header synonyms for the document-id column.
pub(crate) const DOC_COLUMNS: &[&str] = &["doc_id", "docid", "docno"];
/// Header synonyms for the relevance column.
pub(crate) const REL_COLUMNS: &[&str] = &["rel", "relevance", "label", "grade"];

pub(crate) fn is_column_name(field: &str, synonyms: &[&str]) -> bool {
    synonyms.iter().any(|s| s.eq_ignore_ascii_case(field))
}

/// One non-blank input line, or the undecodable remains of one.
pub(crate) enum RawLine<'a> {
    Text(usize, &'a str),
    BadUtf8(usize),
}

/// Splits raw bytes into numbered lines, skipping blank ones. A trailing
/// `\r` is removed so CRLF files parse like LF files.
pub(crate) fn raw_lines(raw: &[u8]) -> impl Iterator<Item = RawLine<'_>> {
    raw.split(|&b| b == b'\n')
        .enumerate()
        .filter_map(|(i, bytes)| {
            let bytes = bytes.strip_suffix(b"\r").unwrap_or(bytes);
            match std::str::from_utf8(bytes) {
                Ok(s) if s.trim().is_empty() => None,
                Ok(s) => Some(RawLine::Text(i + 1, s)),
                Err(_) => Some(RawLine::BadUtf8(i + 1)),
            }
        })
}

pub(crate) fn is_identifier(s: &str) -> bool {
    !s.is_empty() && !s.chars().any(char::is_whitespace)
}

/// Finalizes record accounting and the empty-file rule shared by all parsers.
pub(crate) fn finish_stats(report: &mut ValidationReport, kept: usize) {
    report.stats.records_kept = kept;
    report.stats.records_dropped = report.drop_count();
    if kept == 0 {
        report.file_error(IssueCode::EmptyFile, "no valid records");
    }
}
