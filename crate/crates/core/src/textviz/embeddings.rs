use std::collections::BTreeMap;

use super::vectors::{l2_normalize, QueryVectors, VectorSource};
use crate::error::{fail, Error, ErrorCode, Result};
use crate::trec_io::{raw_lines, IssueCode, QuerySet, RawLine, ValidationReport};

fn parse_jsonl(line: &str) -> std::result::Result<(String, Vec<f64>), String> {
    let value: serde_json::Value = serde_json::from_str(line).map_err(|e| format!("invalid JSON: {e}"))?;
    let qid = match value.get("qid") {
        Some(serde_json::Value::String(s)) => s.trim().to_owned(),
        Some(serde_json::Value::Number(n)) => n.to_string(),
        _ => return Err("missing qid".into()),
    };
    let vector = value
        .get("vector")
        .and_then(|v| v.as_array())
        .ok_or("missing vector array")?
        .iter()
        .map(|x| x.as_f64().ok_or_else(|| "vector entry is not a number".to_string()))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok((qid, vector))
}

fn parse_tsv(line: &str) -> std::result::Result<(String, Vec<f64>), String> {
    let (qid, values) = line.split_once('\t').ok_or("expected qid<TAB>v1,v2,...")?;
    let vector = values
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| format!("'{}' is not a number", v.trim())))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok((qid.trim().to_owned(), vector))
}

/// Imports precomputed query embeddings (JSONL `{"qid", "vector"}` or TSV
/// `qid<TAB>v1,v2,...`). Vectors are L2-normalized and ordered like the query
/// set; queries without a vector are reported and left out.
pub fn load_embeddings(raw: &[u8], queries: &QuerySet) -> Result<(QueryVectors, ValidationReport)> {
    let mut report = ValidationReport::new();
    let mut found: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut jsonl = None;
    let mut dimension = None;

    for line in raw_lines(raw) {
        report.stats.lines_read += 1;
        let (no, text) = match line {
            RawLine::Text(no, s) => (no, s),
            RawLine::BadUtf8(no) => {
                report.line_error(no, IssueCode::InvalidUtf8, "line is not valid UTF-8");
                continue;
            }
        };
        let is_json = *jsonl.get_or_insert_with(|| text.trim_start().starts_with('{'));
        let parsed = if is_json { parse_jsonl(text) } else { parse_tsv(text) };
        let (qid, vector) = match parsed {
            Ok(p) => p,
            Err(msg) => {
                report.line_error(no, IssueCode::InvalidVector, msg);
                continue;
            }
        };
        if vector.is_empty() || vector.iter().any(|v| !v.is_finite()) {
            report.line_error(no, IssueCode::InvalidVector, format!("vector for {qid} is empty or not finite"));
            continue;
        }
        match dimension {
            None => dimension = Some(vector.len()),
            Some(d) if d != vector.len() => {
                return fail(
                    ErrorCode::DimensionMismatch,
                    format!("line {no}: vector for {qid} has {} values, expected {d}", vector.len()),
                )
            }
            Some(_) => {}
        }
        if !queries.contains(&qid) {
            report.drop_warning(no, IssueCode::UnknownEmbeddingQid, format!("{qid} is not in the query set"));
            continue;
        }
        if found.insert(qid.clone(), vector).is_some() {
            report.drop_warning(no, IssueCode::DuplicateQid, format!("second vector for {qid} replaces the first"));
        }
    }

    if report.stats.lines_read == 0 {
        return fail(ErrorCode::EmptyFile, "embedding file is empty");
    }
    if !report.is_ok() {
        return Err(report.to_error());
    }
    if found.is_empty() {
        return fail(ErrorCode::NoOverlap, "no embedding matches a query in the query set");
    }

    let mut qids = Vec::new();
    let mut vectors = Vec::new();
    for rec in &queries.records {
        match found.remove(&rec.qid) {
            Some(mut v) => {
                l2_normalize(&mut v);
                qids.push(rec.qid.clone());
                vectors.push(v);
            }
            None => report.warn(
                None,
                IssueCode::MissingEmbedding,
                format!("query {} has no embedding; excluded", rec.qid),
            ),
        }
    }
    report.stats.records_kept = qids.len();
    report.stats.records_dropped = report.drop_count();
    Ok((
        QueryVectors {
            qids,
            vocabulary: Vec::new(),
            dimension: dimension.unwrap_or(0),
            vectors,
            source: VectorSource::External,
        },
        report,
    ))
}

impl From<ValidationReport> for Error {
    fn from(report: ValidationReport) -> Self {
        report.to_error()
    }
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
    fn jsonl_load() {
        let raw = br#"{"qid": "a", "vector": [1, 0, 0, 0]}
{"qid": "b", "vector": [0, 2, 0, 0]}
{"qid": "c", "vector": [0, 0, 3, 4]}
"#;
        let (v, report) = load_embeddings(raw, &queries(&["a", "b", "c"])).unwrap();
        assert_eq!(v.vectors.len(), 3);
        assert_eq!(v.dimension, 4);
        assert_eq!(v.vectors[2], [0.0, 0.0, 0.6, 0.8]);
        assert!(report.is_empty());
    }

    #[test]
    fn tsv_normalizes() {
        let (v, _) = load_embeddings(b"q1\t3,4\n", &queries(&["q1"])).unwrap();
        assert_eq!(v.vectors[0], [0.6, 0.8]);
    }

    #[test]
    fn mismatch_and_overlap() {
        let err = load_embeddings(b"a\t1,2,3,4\nb\t1,2,3,4,5\n", &queries(&["a", "b"])).unwrap_err();
        assert_eq!(err.code, ErrorCode::DimensionMismatch);
        let err = load_embeddings(b"x\t1,2\n", &queries(&["a"])).unwrap_err();
        assert_eq!(err.code, ErrorCode::NoOverlap);
    }

    #[test]
    fn missing_vectors_are_warnings() {
        let (v, report) = load_embeddings(b"a\t1,2\n", &queries(&["a", "b"])).unwrap();
        assert_eq!(v.qids, ["a"]);
        assert!(report.has_warning(IssueCode::MissingEmbedding));
    }
}
