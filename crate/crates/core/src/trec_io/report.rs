use serde::{Deserialize, Serialize};

use crate::error::{Error, ErrorCode};

/// Codes attached to individual validation findings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum IssueCode {
    // file-level errors
    EmptyFile,
    UnknownFormat,
    MalformedFile,
    // line-level errors
    InvalidUtf8,
    WrongColumnCount,
    InvalidQid,
    InvalidDocId,
    EmptyText,
    InvalidJson,
    NonIntegerGrade,
    NonNumericScore,
    NonFiniteScore,
    InvalidRank,
    InvalidVector,
    // warnings
    HeaderSkipped,
    DuplicateQid,
    DuplicateJudgment,
    DuplicateDoc,
    MultipleRunTags,
    RankOrderMismatch,
    QrelsQidNotInQueries,
    RunQidNotInQrels,
    RunMissingQid,
    NoRelevantDocs,
    QrelsReplaced,
    MissingEmbedding,
    UnknownEmbeddingQid,
    QueryNotInQuerySet,
    EmptyBucket,
}

impl IssueCode {
    pub fn as_str(self) -> String {
        serde_json::to_value(self)
            .ok()
            .and_then(|v| v.as_str().map(str::to_owned))
            .unwrap_or_default()
    }
}

/// A single finding. `line` is 1-based and absent for file-level findings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Issue {
    pub line: Option<usize>,
    pub code: IssueCode,
    pub message: String,
    /// Whether the finding removed a record from the parsed output.
    #[serde(default)]
    pub dropped: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseStats {
    pub lines_read: usize,
    pub records_kept: usize,
    pub records_dropped: usize,
}

/// Errors, warnings and record accounting for one parsed input.
///
/// A report with any error means the associated parse result was rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub errors: Vec<Issue>,
    pub warnings: Vec<Issue>,
    pub stats: ParseStats,
}

impl ValidationReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_ok(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn is_empty(&self) -> bool {
        self.errors.is_empty() && self.warnings.is_empty()
    }

    pub(crate) fn line_error(&mut self, line: usize, code: IssueCode, message: impl Into<String>) {
        self.errors.push(Issue {
            line: Some(line),
            code,
            message: message.into(),
            dropped: true,
        });
    }

    pub(crate) fn file_error(&mut self, code: IssueCode, message: impl Into<String>) {
        self.errors.push(Issue {
            line: None,
            code,
            message: message.into(),
            dropped: false,
        });
    }

    pub(crate) fn warn(&mut self, line: Option<usize>, code: IssueCode, message: impl Into<String>) {
        self.warnings.push(Issue {
            line,
            code,
            message: message.into(),
            dropped: false,
        });
    }

    pub(crate) fn drop_warning(&mut self, line: usize, code: IssueCode, message: impl Into<String>) {
        self.warnings.push(Issue {
            line: Some(line),
            code,
            message: message.into(),
            dropped: true,
        });
    }

    /// Number of findings that removed a record.
    pub fn drop_count(&self) -> usize {
        self.errors
            .iter()
            .chain(&self.warnings)
            .filter(|i| i.dropped)
            .count()
    }

    pub fn has_error(&self, code: IssueCode) -> bool {
        self.errors.iter().any(|i| i.code == code)
    }

    pub fn has_warning(&self, code: IssueCode) -> bool {
        self.warnings.iter().any(|i| i.code == code)
    }

    pub fn merge(&mut self, other: ValidationReport) {
        self.errors.extend(other.errors);
        self.warnings.extend(other.warnings);
        self.stats.lines_read += other.stats.lines_read;
        self.stats.records_kept += other.stats.records_kept;
        self.stats.records_dropped += other.stats.records_dropped;
    }

    /// Converts a rejected report into an [`Error`]. File-level codes win over
    /// line-level ones.
    pub fn to_error(&self) -> Error {
        let code = if self.has_error(IssueCode::EmptyFile) {
            ErrorCode::EmptyFile
        } else if self.has_error(IssueCode::UnknownFormat) {
            ErrorCode::UnknownFormat
        } else if self.has_error(IssueCode::MalformedFile) {
            ErrorCode::MalformedFile
        } else {
            ErrorCode::InvalidInput
        };
        let message = self
            .errors
            .iter()
            .map(|i| match i.line {
                Some(l) => format!("line {l}: {}", i.message),
                None => i.message.clone(),
            })
            .collect::<Vec<_>>()
            .join("; ");
        Error::new(code, message)
            .with_details(serde_json::to_value(self).unwrap_or(serde_json::Value::Null))
    }

    /// Human-readable rendering used by the CLI.
    pub fn render(&self, title: &str) -> String {
        let mut out = format!(
            "{title}: {} lines read, {} kept, {} dropped, {} errors, {} warnings\n",
            self.stats.lines_read,
            self.stats.records_kept,
            self.stats.records_dropped,
            self.errors.len(),
            self.warnings.len()
        );
        for (kind, issues) in [("error", &self.errors), ("warning", &self.warnings)] {
            for i in issues {
                match i.line {
                    Some(l) => out.push_str(&format!(
                        "  {kind} line {l} [{}] {}\n",
                        i.code.as_str(),
                        i.message
                    )),
                    None => out.push_str(&format!("  {kind} [{}] {}\n", i.code.as_str(), i.message)),
                }
            }
        }
        out
    }
}

/// A successfully parsed value together with its (error-free) report.
#[derive(Debug, Clone, PartialEq)]
pub struct Parsed<T> {
    pub value: T,
    pub report: ValidationReport,
}

/// `Err` carries the rejecting report.
pub type ParseOutcome<T> = Result<Parsed<T>, ValidationReport>;
