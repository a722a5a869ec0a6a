//! Crate-wide error type.
//!
//! Every failure carries a stable machine-readable [`ErrorCode`]. The server
//! serializes it into `{code, message, details}` bodies, the CLI maps it onto
//! exit codes and the FFI layer onto integer status values.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Stable error identifiers shared by every front end.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ErrorCode {
    // input files
    EmptyFile,
    UnknownFormat,
    MalformedFile,
    InvalidInput,
    InvalidDepth,
    // measures
    UnknownMeasure,
    MissingCutoff,
    UnexpectedCutoff,
    InvalidCutoff,
    InvalidThreshold,
    NoRelevantDocs,
    NoEvaluableQueries,
    // statistics
    InsufficientData,
    InvalidPvalue,
    InvalidParameter,
    ZeroVariance,
    ConstantInput,
    // analysis
    UnknownRun,
    DocNotFound,
    // text
    AllTokensFiltered,
    ZeroVector,
    DegenerateVariance,
    DimensionMismatch,
    NoOverlap,
    // reports
    EmptyResults,
    NoResults,
    // sessions
    UnknownSession,
    UnknownReference,
    DuplicateRunName,
    MissingInputs,
    ResultPending,
    ResultFailed,
    StorageFailure,
    PayloadTooLarge,
}

impl ErrorCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::EmptyFile => "EMPTY_FILE",
            ErrorCode::UnknownFormat => "UNKNOWN_FORMAT",
            ErrorCode::MalformedFile => "MALFORMED_FILE",
            ErrorCode::InvalidInput => "INVALID_INPUT",
            ErrorCode::InvalidDepth => "INVALID_DEPTH",
            ErrorCode::UnknownMeasure => "UNKNOWN_MEASURE",
            ErrorCode::MissingCutoff => "MISSING_CUTOFF",
            ErrorCode::UnexpectedCutoff => "UNEXPECTED_CUTOFF",
            ErrorCode::InvalidCutoff => "INVALID_CUTOFF",
            ErrorCode::InvalidThreshold => "INVALID_THRESHOLD",
            ErrorCode::NoRelevantDocs => "NO_RELEVANT_DOCS",
            ErrorCode::NoEvaluableQueries => "NO_EVALUABLE_QUERIES",
            ErrorCode::InsufficientData => "INSUFFICIENT_DATA",
            ErrorCode::InvalidPvalue => "INVALID_PVALUE",
            ErrorCode::InvalidParameter => "INVALID_PARAMETER",
            ErrorCode::ZeroVariance => "ZERO_VARIANCE",
            ErrorCode::ConstantInput => "CONSTANT_INPUT",
            ErrorCode::UnknownRun => "UNKNOWN_RUN",
            ErrorCode::DocNotFound => "DOC_NOT_FOUND",
            ErrorCode::AllTokensFiltered => "ALL_TOKENS_FILTERED",
            ErrorCode::ZeroVector => "ZERO_VECTOR",
            ErrorCode::DegenerateVariance => "DEGENERATE_VARIANCE",
            ErrorCode::DimensionMismatch => "DIMENSION_MISMATCH",
            ErrorCode::NoOverlap => "NO_OVERLAP",
            ErrorCode::EmptyResults => "EMPTY_RESULTS",
            ErrorCode::NoResults => "NO_RESULTS",
            ErrorCode::UnknownSession => "UNKNOWN_SESSION",
            ErrorCode::UnknownReference => "UNKNOWN_REFERENCE",
            ErrorCode::DuplicateRunName => "DUPLICATE_RUN_NAME",
            ErrorCode::MissingInputs => "MISSING_INPUTS",
            ErrorCode::ResultPending => "RESULT_PENDING",
            ErrorCode::ResultFailed => "RESULT_FAILED",
            ErrorCode::StorageFailure => "STORAGE_FAILURE",
            ErrorCode::PayloadTooLarge => "PAYLOAD_TOO_LARGE",
        }
    }
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// An error with a stable code, a human message and optional structured details.
#[derive(Debug, Clone, PartialEq, thiserror::Error, Serialize, Deserialize)]
#[error("{code}: {message}")]
pub struct Error {
    pub code: ErrorCode,
    pub message: String,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub details: serde_json::Value,
}

impl Error {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        Error {
            code,
            message: message.into(),
            details: serde_json::Value::Null,
        }
    }

    pub fn with_details(mut self, details: serde_json::Value) -> Self {
        self.details = details;
        self
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Shorthand for `Err(Error::new(code, message))`.
pub(crate) fn fail<T>(code: ErrorCode, message: impl Into<String>) -> Result<T> {
    Err(Error::new(code, message))
}
