use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{
    finish_stats, is_column_name, is_identifier, raw_lines, IssueCode, ParseOutcome, Parsed,
    RawLine, ValidationReport, QID_COLUMNS,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub qid: String,
    pub text: String,
}

/// Topics in order of first appearance, unique by qid.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuerySet {
    pub records: Vec<QueryRecord>,
}

impl QuerySet {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, qid: &str) -> Option<&QueryRecord> {
        self.records.iter().find(|r| r.qid == qid)
    }

    pub fn contains(&self, qid: &str) -> bool {
        self.get(qid).is_some()
    }

    pub fn qids(&self) -> impl Iterator<Item = &str> {
        self.records.iter().map(|r| r.qid.as_str())
    }

    /// `qid<TAB>text` lines.
    pub fn to_tsv(&self) -> String {
        self.records
            .iter()
            .map(|r| format!("{}\t{}\n", r.qid, r.text))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QueryFormat {
    Tsv,
    Csv,
    Jsonl,
    #[default]
    Auto,
}

impl std::str::FromStr for QueryFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "tsv" => Ok(QueryFormat::Tsv),
            "csv" => Ok(QueryFormat::Csv),
            "jsonl" => Ok(QueryFormat::Jsonl),
            "auto" => Ok(QueryFormat::Auto),
            other => Err(format!("unknown query format '{other}'")),
        }
    }
}

const TEXT_KEYS: &[&str] = &["text", "query", "query_text"];

fn detect(first: &str) -> Option<QueryFormat> {
    if matches!(
        serde_json::from_str::<serde_json::Value>(first),
        Ok(serde_json::Value::Object(_))
    ) {
        Some(QueryFormat::Jsonl)
    } else if first.contains('\t') {
        Some(QueryFormat::Tsv)
    } else if first.contains(',') {
        Some(QueryFormat::Csv)
    } else {
        None
    }
}

enum Fields {
    Pair(String, String),
    Bad(IssueCode, String),
}

fn split_tsv(line: &str) -> Fields {
    match line.split_once('\t') {
        Some((qid, text)) => Fields::Pair(qid.trim().to_owned(), text.trim().to_owned()),
        None => Fields::Bad(IssueCode::WrongColumnCount, "expected qid<TAB>text".into()),
    }
}

fn split_csv(line: &str) -> Fields {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(line.as_bytes());
    match reader.records().next() {
        Some(Ok(rec)) if rec.len() == 2 => {
            Fields::Pair(rec[0].trim().to_owned(), rec[1].trim().to_owned())
        }
        Some(Ok(rec)) => Fields::Bad(
            IssueCode::WrongColumnCount,
            format!("expected 2 CSV columns, found {}", rec.len()),
        ),
        Some(Err(e)) => Fields::Bad(IssueCode::WrongColumnCount, format!("bad CSV: {e}")),
        None => Fields::Bad(IssueCode::WrongColumnCount, "empty CSV record".into()),
    }
}

fn split_jsonl(line: &str) -> Fields {
    let value: serde_json::Value = match serde_json::from_str(line) {
        Ok(v) => v,
        Err(e) => return Fields::Bad(IssueCode::InvalidJson, format!("invalid JSON: {e}")),
    };
    let Some(obj) = value.as_object() else {
        return Fields::Bad(IssueCode::InvalidJson, "expected a JSON object".into());
    };
    let pick = |keys: &[&str]| {
        obj.iter()
            .find(|(k, _)| is_column_name(k, keys))
            .map(|(_, v)| match v {
                serde_json::Value::String(s) => s.trim().to_owned(),
                serde_json::Value::Number(n) => n.to_string(),
                _ => String::new(),
            })
    };
    match (pick(QID_COLUMNS), pick(TEXT_KEYS)) {
        (Some(qid), Some(text)) => Fields::Pair(qid, text),
        (None, _) => Fields::Bad(IssueCode::InvalidQid, "object has no qid field".into()),
        (_, None) => Fields::Bad(IssueCode::EmptyText, "object has no text field".into()),
    }
}

/// Parses a topic file.
///
/// Duplicate qids keep the first occurrence. A leading header row whose first
/// field is a known qid column name is skipped. Auto-detection looks at the
/// first non-blank line and tries JSONL, then TSV, then CSV.
pub fn parse_queries(raw: &[u8], format: QueryFormat) -> ParseOutcome<QuerySet> {
    let mut report = ValidationReport::new();
    let mut lines = raw_lines(raw).peekable();

    if lines.peek().is_none() {
        report.file_error(IssueCode::EmptyFile, "input is empty");
        return Err(report);
    }

    let format = match format {
        QueryFormat::Auto => {
            let first = raw_lines(raw).find_map(|l| match l {
                RawLine::Text(_, s) => Some(s),
                RawLine::BadUtf8(_) => None,
            });
            match first.and_then(detect) {
                Some(f) => f,
                None => {
                    report.file_error(
                        IssueCode::UnknownFormat,
                        "could not detect JSONL, TSV or CSV layout",
                    );
                    return Err(report);
                }
            }
        }
        explicit => explicit,
    };

    let mut seen = HashSet::new();
    let mut records = Vec::new();
    let mut first_record = true;

    for line in lines {
        report.stats.lines_read += 1;
        let (no, text) = match line {
            RawLine::Text(no, s) => (no, s),
            RawLine::BadUtf8(no) => {
                report.line_error(no, IssueCode::InvalidUtf8, "line is not valid UTF-8");
                continue;
            }
        };
        let fields = match format {
            QueryFormat::Tsv => split_tsv(text),
            QueryFormat::Csv => split_csv(text),
            QueryFormat::Jsonl | QueryFormat::Auto => split_jsonl(text),
        };
        let is_first = std::mem::replace(&mut first_record, false);
        let (qid, text) = match fields {
            Fields::Pair(q, t) => (q, t),
            Fields::Bad(code, msg) => {
                report.line_error(no, code, msg);
                continue;
            }
        };
        if is_first && format != QueryFormat::Jsonl && is_column_name(&qid, QID_COLUMNS) {
            report.drop_warning(no, IssueCode::HeaderSkipped, format!("header row '{qid}' skipped"));
            continue;
        }
        if !is_identifier(&qid) {
            report.line_error(no, IssueCode::InvalidQid, format!("invalid qid '{qid}'"));
            continue;
        }
        if text.is_empty() {
            report.line_error(no, IssueCode::EmptyText, format!("query {qid} has empty text"));
            continue;
        }
        if !seen.insert(qid.clone()) {
            report.drop_warning(
                no,
                IssueCode::DuplicateQid,
                format!("duplicate qid {qid}; first occurrence kept"),
            );
            continue;
        }
        records.push(QueryRecord { qid, text });
    }

    finish_stats(&mut report, records.len());
    if report.is_ok() {
        Ok(Parsed {
            value: QuerySet { records },
            report,
        })
    } else {
        Err(report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ok(raw: &str) -> Parsed<QuerySet> {
        parse_queries(raw.as_bytes(), QueryFormat::Auto).expect("parse")
    }

    #[test]
    fn single_tsv_query() {
        let p = ok("q1\theart attack treatment\n");
        assert_eq!(
            p.value.records,
            vec![QueryRecord {
                qid: "q1".into(),
                text: "heart attack treatment".into()
            }]
        );
        assert!(p.report.warnings.is_empty());
    }

    #[test]
    fn empty_input() {
        let r = parse_queries(b"", QueryFormat::Auto).unwrap_err();
        assert!(r.has_error(IssueCode::EmptyFile));
    }

    #[test]
    fn duplicate_qid_first_wins() {
        let p = ok("q1\ta\nq1\tb\n");
        assert_eq!(p.value.records.len(), 1);
        assert_eq!(p.value.records[0].text, "a");
        assert_eq!(p.report.warnings.len(), 1);
        assert_eq!(p.report.warnings[0].code, IssueCode::DuplicateQid);
        assert_eq!(p.report.stats.records_dropped, 1);
    }

    #[test]
    fn header_variants_are_skipped() {
        for header in ["qid\ttext", "Query_ID\tquery", "TOPIC\tdesc"] {
            let p = ok(&format!("{header}\nq1\tfoo\n"));
            assert_eq!(p.value.len(), 1);
            assert!(p.report.has_warning(IssueCode::HeaderSkipped));
        }
    }

    #[test]
    fn jsonl_and_csv() {
        let p = ok("{\"qid\": \"7\", \"text\": \"lung cancer\"}\n{\"query_id\": 8, \"text\": \"x\"}\n");
        assert_eq!(p.value.qids().collect::<Vec<_>>(), ["7", "8"]);
        let p = ok("qid,text\n1,\"a, b\"\n");
        assert_eq!(p.value.records[0].text, "a, b");
    }

    #[test]
    fn unknown_format() {
        let r = parse_queries(b"justoneword\n", QueryFormat::Auto).unwrap_err();
        assert!(r.has_error(IssueCode::UnknownFormat));
    }

    #[test]
    fn invalid_utf8_is_a_line_error() {
        let r = parse_queries(b"q1\tok\nq2\t\xff\xfe\n", QueryFormat::Tsv).unwrap_err();
        assert_eq!(r.errors[0].line, Some(2));
        assert_eq!(r.errors[0].code, IssueCode::InvalidUtf8);
        assert_eq!(r.stats.lines_read, 2);
        assert_eq!(r.stats.records_kept + r.stats.records_dropped, 2);
    }

    #[test]
    fn preserves_first_appearance_order() {
        let p = ok("z\t1\na\t2\nm\t3\n");
        assert_eq!(p.value.qids().collect::<Vec<_>>(), ["z", "a", "m"]);
    }
}
