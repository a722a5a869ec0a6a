//! An analysis session: uploaded inputs plus the results computed from them.
//!
//! Results are keyed by a reference derived from the request kind, its
//! canonical parameters and the digests of the inputs it reads, so asking for
//! the same analysis twice on the same files returns the cached result.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::engine::{execute, missing_inputs, AnalysisOutput, AnalysisRequest, InputKind, Inputs};
use crate::error::{fail, Error, ErrorCode, Result};
use crate::report::canonical_json;
use crate::textviz::{load_embeddings, QueryVectors};
use crate::trec_io::{
    parse_qrels, parse_queries, parse_runs, validate_alignment, IssueCode, QrelsStore, QueryFormat, QuerySet,
    RunStore, ValidationReport,
};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// An ingested file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Upload<T> {
    pub name: String,
    pub digest: String,
    pub report: ValidationReport,
    pub data: T,
}

/// Names an input and pins its content.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct InputDigest {
    pub kind: InputKind,
    pub name: String,
    pub digest: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobState {
    Queued,
    Running,
    Done,
    Failed,
}

impl JobState {
    pub fn is_pending(self) -> bool {
        matches!(self, JobState::Queued | JobState::Running)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            JobState::Queued => "queued",
            JobState::Running => "running",
            JobState::Done => "done",
            JobState::Failed => "failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredResult {
    pub reference: String,
    pub request: AnalysisRequest,
    pub inputs: Vec<InputDigest>,
    pub state: JobState,
    pub created_at: String,
    pub completed_at: Option<String>,
    pub output: Option<AnalysisOutput>,
    pub error: Option<Error>,
}

/// A request resolved against a session: canonical form, reference and the
/// exact inputs it will read.
#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    pub request: AnalysisRequest,
    pub reference: String,
    pub inputs: Vec<InputDigest>,
}

/// Owned copies of the inputs one analysis reads, detached from the session
/// so the work can run without holding it.
#[derive(Debug, Clone, Default)]
pub struct InputSnapshot {
    pub queries: Option<QuerySet>,
    pub qrels: Option<QrelsStore>,
    pub runs: Vec<RunStore>,
    pub embeddings: Option<QueryVectors>,
}

impl InputSnapshot {
    pub fn as_inputs(&self) -> Inputs<'_> {
        Inputs {
            queries: self.queries.as_ref(),
            qrels: self.qrels.as_ref(),
            runs: &self.runs,
            embeddings: self.embeddings.as_ref(),
        }
    }

    pub fn execute(&self, request: &AnalysisRequest) -> Result<AnalysisOutput> {
        execute(request, &self.as_inputs())
    }
}

/// Whether [`AnalysisSession::begin`] found a usable result.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Begin {
    /// Done or still in progress; nothing new to run.
    Existing(JobState),
    /// A fresh queued entry was created.
    Queued,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultSummary {
    pub reference: String,
    pub kind: String,
    pub state: JobState,
    pub created_at: String,
    pub current: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub session_id: String,
    pub created_at: String,
    pub updated_at: String,
    pub inputs: Vec<InputDigest>,
    pub run_ids: Vec<String>,
    pub results: Vec<ResultSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisSession {
    pub session_id: String,
    pub created_at: String,
    pub updated_at: String,
    pub queries: Option<Upload<QuerySet>>,
    pub qrels: Option<Upload<QrelsStore>>,
    /// Run files in upload order; one file may hold several runs.
    pub runs: Vec<Upload<Vec<RunStore>>>,
    pub embeddings: BTreeMap<String, Upload<QueryVectors>>,
    pub results: BTreeMap<String, StoredResult>,
}

fn check_name(name: &str) -> Result<()> {
    if name.trim().is_empty() || name.contains(['/', '\\']) || name.chars().any(char::is_control) {
        return fail(ErrorCode::InvalidParameter, format!("invalid file name '{name}'"));
    }
    Ok(())
}

impl AnalysisSession {
    pub fn new(session_id: impl Into<String>, now: &str) -> Self {
        AnalysisSession {
            session_id: session_id.into(),
            created_at: now.to_owned(),
            updated_at: now.to_owned(),
            queries: None,
            qrels: None,
            runs: Vec::new(),
            embeddings: BTreeMap::new(),
            results: BTreeMap::new(),
        }
    }

    pub fn run_stores(&self) -> impl Iterator<Item = &RunStore> {
        self.runs.iter().flat_map(|u| u.data.iter())
    }

    pub fn run_ids(&self) -> Vec<String> {
        self.run_stores().map(|r| r.run_id.clone()).collect()
    }

    /// Parses and attaches one file. A rejected file leaves the session
    /// unchanged and comes back as an error whose details hold the report.
    /// The returned report also carries cross-file alignment warnings.
    pub fn ingest(&mut self, kind: InputKind, name: &str, raw: &[u8], now: &str) -> Result<ValidationReport> {
        check_name(name)?;
        let digest = sha256_hex(raw);
        let mut report = match kind {
            InputKind::Queries => {
                let parsed = parse_queries(raw, QueryFormat::Auto).map_err(|r| r.to_error())?;
                let report = parsed.report.clone();
                self.queries = Some(Upload {
                    name: name.to_owned(),
                    digest,
                    report: parsed.report,
                    data: parsed.value,
                });
                report
            }
            InputKind::Qrels => {
                let parsed = parse_qrels(raw).map_err(|r| r.to_error())?;
                let mut report = parsed.report.clone();
                if let Some(old) = &self.qrels {
                    report.warn(
                        None,
                        IssueCode::QrelsReplaced,
                        format!("qrels '{}' replaced by '{name}'", old.name),
                    );
                }
                self.qrels = Some(Upload {
                    name: name.to_owned(),
                    digest,
                    report: parsed.report,
                    data: parsed.value,
                });
                report
            }
            InputKind::Run => {
                if self.runs.iter().any(|u| u.name == name) {
                    return fail(ErrorCode::DuplicateRunName, format!("a run file named '{name}' already exists"));
                }
                let parsed = parse_runs(raw).map_err(|r| r.to_error())?;
                let existing = self.run_ids();
                if let Some(clash) = parsed.value.iter().find(|r| existing.contains(&r.run_id)) {
                    return Err(Error::new(
                        ErrorCode::DuplicateRunName,
                        format!("run '{}' is already in the session", clash.run_id),
                    )
                    .with_details(serde_json::json!({ "run_id": clash.run_id })));
                }
                let report = parsed.report.clone();
                self.runs.push(Upload {
                    name: name.to_owned(),
                    digest,
                    report: parsed.report,
                    data: parsed.value,
                });
                report
            }
            InputKind::Embeddings => {
                let queries = self.queries.as_ref().ok_or_else(|| missing_inputs(&[InputKind::Queries]))?;
                let (vectors, report) = load_embeddings(raw, &queries.data)?;
                self.embeddings.insert(
                    name.to_owned(),
                    Upload {
                        name: name.to_owned(),
                        digest,
                        report: report.clone(),
                        data: vectors,
                    },
                );
                report
            }
        };
        if kind != InputKind::Embeddings {
            if let Some(qrels) = &self.qrels {
                let runs: Vec<RunStore> = self.run_stores().cloned().collect();
                report.merge(validate_alignment(self.queries.as_ref().map(|q| &q.data), &qrels.data, &runs));
            }
        }
        self.updated_at = now.to_owned();
        Ok(report)
    }

    /// Every attached input, in a stable order.
    pub fn input_digests(&self) -> Vec<InputDigest> {
        let mut out = Vec::new();
        if let Some(q) = &self.queries {
            out.push(InputDigest {
                kind: InputKind::Queries,
                name: q.name.clone(),
                digest: q.digest.clone(),
            });
        }
        if let Some(q) = &self.qrels {
            out.push(InputDigest {
                kind: InputKind::Qrels,
                name: q.name.clone(),
                digest: q.digest.clone(),
            });
        }
        for u in &self.runs {
            out.push(InputDigest {
                kind: InputKind::Run,
                name: u.name.clone(),
                digest: u.digest.clone(),
            });
        }
        for u in self.embeddings.values() {
            out.push(InputDigest {
                kind: InputKind::Embeddings,
                name: u.name.clone(),
                digest: u.digest.clone(),
            });
        }
        out
    }

    fn embedding_name(request: &AnalysisRequest) -> Option<&str> {
        match request {
            AnalysisRequest::Projection(p) => p.embeddings.as_deref(),
            _ => None,
        }
    }

    /// Canonicalizes the request, checks its inputs exist and derives its
    /// reference.
    pub fn prepare(&self, request: &AnalysisRequest) -> Result<Prepared> {
        let request = request.canonicalize()?;
        let wanted = request.inputs();
        let embedding = Self::embedding_name(&request);
        let mut missing = Vec::new();
        let mut inputs = Vec::new();
        for digest in self.input_digests() {
            let used = wanted.contains(&digest.kind)
                && (digest.kind != InputKind::Embeddings || embedding == Some(digest.name.as_str()));
            if used {
                inputs.push(digest);
            }
        }
        for kind in &wanted {
            if !inputs.iter().any(|d| d.kind == *kind) {
                missing.push(*kind);
            }
        }
        if !missing.is_empty() {
            let mut err = missing_inputs(&missing);
            if let Some(name) = embedding.filter(|_| missing.contains(&InputKind::Embeddings)) {
                err.message = format!("{}; no embeddings named '{name}'", err.message);
            }
            return Err(err);
        }
        let key = serde_json::json!({
            "request": serde_json::to_value(&request).map_err(internal)?,
            "inputs": serde_json::to_value(&inputs).map_err(internal)?,
        });
        let reference = sha256_hex(canonical_json(&key)?.as_bytes());
        Ok(Prepared {
            request,
            reference,
            inputs,
        })
    }

    /// Copies the inputs a prepared request reads.
    pub fn snapshot(&self, prepared: &Prepared) -> InputSnapshot {
        let wanted = prepared.request.inputs();
        let embedding = Self::embedding_name(&prepared.request);
        InputSnapshot {
            queries: self
                .queries
                .as_ref()
                .filter(|_| wanted.contains(&InputKind::Queries))
                .map(|u| u.data.clone()),
            qrels: self
                .qrels
                .as_ref()
                .filter(|_| wanted.contains(&InputKind::Qrels))
                .map(|u| u.data.clone()),
            runs: if wanted.contains(&InputKind::Run) {
                self.run_stores().cloned().collect()
            } else {
                Vec::new()
            },
            embeddings: embedding.and_then(|n| self.embeddings.get(n)).map(|u| u.data.clone()),
        }
    }

    /// Copies every attached input; embeddings are left out.
    pub fn full_snapshot(&self) -> InputSnapshot {
        InputSnapshot {
            queries: self.queries.as_ref().map(|u| u.data.clone()),
            qrels: self.qrels.as_ref().map(|u| u.data.clone()),
            runs: self.run_stores().cloned().collect(),
            embeddings: None,
        }
    }

    /// Runs the default analysis suite for the attached inputs.
    pub fn run_default_suite(&mut self, now: &str) -> Result<Vec<String>> {
        let suite = crate::engine::default_suite(&self.full_snapshot().as_inputs());
        suite.iter().map(|req| self.run_inline(req, now)).collect()
    }

    /// Registers a prepared request. A finished or in-flight result with the
    /// same reference is reused; a failed one is retried.
    pub fn begin(&mut self, prepared: &Prepared, now: &str) -> Begin {
        if let Some(existing) = self.results.get(&prepared.reference) {
            if existing.state != JobState::Failed {
                return Begin::Existing(existing.state);
            }
        }
        self.results.insert(
            prepared.reference.clone(),
            StoredResult {
                reference: prepared.reference.clone(),
                request: prepared.request.clone(),
                inputs: prepared.inputs.clone(),
                state: JobState::Queued,
                created_at: now.to_owned(),
                completed_at: None,
                output: None,
                error: None,
            },
        );
        self.updated_at = now.to_owned();
        Begin::Queued
    }

    pub fn set_state(&mut self, reference: &str, state: JobState) {
        if let Some(r) = self.results.get_mut(reference) {
            r.state = state;
        }
    }

    pub fn finish(&mut self, reference: &str, outcome: Result<AnalysisOutput>, now: &str) {
        if let Some(r) = self.results.get_mut(reference) {
            match outcome {
                Ok(output) => {
                    r.state = JobState::Done;
                    r.output = Some(output);
                    r.error = None;
                }
                Err(e) => {
                    r.state = JobState::Failed;
                    r.output = None;
                    r.error = Some(e);
                }
            }
            r.completed_at = Some(now.to_owned());
            self.updated_at = now.to_owned();
        }
    }

    /// Prepares, computes and stores a request in the calling thread.
    pub fn run_inline(&mut self, request: &AnalysisRequest, now: &str) -> Result<String> {
        let prepared = self.prepare(request)?;
        if self.begin(&prepared, now) == Begin::Queued {
            let outcome = self.snapshot(&prepared).execute(&prepared.request);
            self.finish(&prepared.reference, outcome, now);
        }
        Ok(prepared.reference)
    }

    pub fn stored(&self, reference: &str) -> Result<&StoredResult> {
        self.results
            .get(reference)
            .ok_or_else(|| Error::new(ErrorCode::UnknownReference, format!("no result with reference '{reference}'")))
    }

    /// The output of a finished result.
    pub fn output(&self, reference: &str) -> Result<&AnalysisOutput> {
        let stored = self.stored(reference)?;
        match (stored.state, &stored.output, &stored.error) {
            (JobState::Done, Some(out), _) => Ok(out),
            (JobState::Failed, _, err) => Err(Error::new(
                ErrorCode::ResultFailed,
                format!(
                    "analysis failed: {}",
                    err.as_ref().map_or_else(|| "unknown error".to_owned(), |e| e.message.clone())
                ),
            )
            .with_details(serde_json::to_value(err).unwrap_or_default())),
            (state, _, _) => Err(Error::new(ErrorCode::ResultPending, format!("analysis is {}", state.as_str()))
                .with_details(serde_json::json!({ "state": state }))),
        }
    }

    /// Whether a result was computed from the inputs attached right now.
    pub fn is_current(&self, result: &StoredResult) -> bool {
        let now = self.input_digests();
        result.inputs.iter().all(|d| now.contains(d))
    }

    /// Finished results computed from the current inputs, in page order
    /// then by reference.
    pub fn current_results(&self) -> Vec<&StoredResult> {
        let mut out: Vec<&StoredResult> = self
            .results
            .values()
            .filter(|r| r.state == JobState::Done && self.is_current(r))
            .collect();
        out.sort_by(|a, b| (a.request.kind_rank(), &a.reference).cmp(&(b.request.kind_rank(), &b.reference)));
        out
    }

    /// Marks queued and running work as failed; used after a restart.
    pub fn fail_pending(&mut self, now: &str) -> usize {
        let mut n = 0;
        for r in self.results.values_mut().filter(|r| r.state.is_pending()) {
            r.state = JobState::Failed;
            r.error = Some(Error::new(ErrorCode::ResultFailed, "interrupted by a server restart"));
            r.completed_at = Some(now.to_owned());
            n += 1;
        }
        n
    }

    pub fn summary(&self) -> SessionSummary {
        SessionSummary {
            session_id: self.session_id.clone(),
            created_at: self.created_at.clone(),
            updated_at: self.updated_at.clone(),
            inputs: self.input_digests(),
            run_ids: self.run_ids(),
            results: self
                .results
                .values()
                .map(|r| ResultSummary {
                    reference: r.reference.clone(),
                    kind: r.request.kind().to_owned(),
                    state: r.state,
                    created_at: r.created_at.clone(),
                    current: self.is_current(r),
                })
                .collect(),
        }
    }
}

fn internal(e: serde_json::Error) -> Error {
    Error::new(ErrorCode::InvalidInput, format!("serialization failed: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    const NOW: &str = "2026-01-01T00:00:00Z";
    const QRELS: &[u8] = b"q1 0 a 2\nq1 0 b 0\nq2 0 c 1\n";
    const RUN_A: &[u8] = b"q1 Q0 a 1 3.0 sysA\nq1 Q0 b 2 2.0 sysA\nq2 Q0 c 1 1.0 sysA\n";
    const RUN_B: &[u8] = b"q1 Q0 b 1 3.0 sysB\nq1 Q0 a 2 2.0 sysB\nq2 Q0 x 1 1.0 sysB\n";

    fn eval_request() -> AnalysisRequest {
        AnalysisRequest::from_json(serde_json::json!({"kind": "evaluate", "params": {"measures": ["AP"]}})).unwrap()
    }

    fn session() -> AnalysisSession {
        let mut s = AnalysisSession::new("s", NOW);
        s.ingest(InputKind::Qrels, "qrels.txt", QRELS, NOW).unwrap();
        s.ingest(InputKind::Run, "a.run", RUN_A, NOW).unwrap();
        s.ingest(InputKind::Run, "b.run", RUN_B, NOW).unwrap();
        s
    }

    #[test]
    fn cache_hit_returns_same_reference() {
        let mut s = session();
        let r1 = s.run_inline(&eval_request(), NOW).unwrap();
        let r2 = s.run_inline(&eval_request(), "later").unwrap();
        assert_eq!(r1, r2);
        assert_eq!(s.results.len(), 1);
        assert_eq!(s.stored(&r1).unwrap().created_at, NOW);
    }

    #[test]
    fn replacing_qrels_changes_reference_and_warns() {
        let mut s = session();
        let r1 = s.run_inline(&eval_request(), NOW).unwrap();
        let report = s.ingest(InputKind::Qrels, "qrels2.txt", b"q1 0 a 1\nq2 0 c 1\n", NOW).unwrap();
        assert!(report.has_warning(IssueCode::QrelsReplaced));
        let r2 = s.run_inline(&eval_request(), NOW).unwrap();
        assert_ne!(r1, r2);
        assert!(!s.is_current(s.stored(&r1).unwrap()));
        assert_eq!(s.current_results().len(), 1);
    }

    #[test]
    fn duplicate_runs_rejected() {
        let mut s = session();
        assert_eq!(
            s.ingest(InputKind::Run, "a.run", RUN_B, NOW).unwrap_err().code,
            ErrorCode::DuplicateRunName
        );
        assert_eq!(
            s.ingest(InputKind::Run, "c.run", RUN_A, NOW).unwrap_err().code,
            ErrorCode::DuplicateRunName
        );
        assert_eq!(s.run_ids(), ["sysA", "sysB"]);
    }

    #[test]
    fn rejected_file_leaves_session_unchanged() {
        let mut s = session();
        let before = s.clone();
        let err = s.ingest(InputKind::Qrels, "bad.txt", b"q1 0 a x\n", NOW).unwrap_err();
        assert!(err.details.get("errors").is_some());
        assert_eq!(s, before);
    }

    #[test]
    fn missing_inputs_and_states() {
        let mut s = AnalysisSession::new("s", NOW);
        assert_eq!(s.prepare(&eval_request()).unwrap_err().code, ErrorCode::MissingInputs);
        let mut s2 = session();
        let p = s2.prepare(&eval_request()).unwrap();
        assert_eq!(s2.begin(&p, NOW), Begin::Queued);
        assert_eq!(s2.output(&p.reference).unwrap_err().code, ErrorCode::ResultPending);
        assert_eq!(s2.fail_pending(NOW), 1);
        assert_eq!(s2.output(&p.reference).unwrap_err().code, ErrorCode::ResultFailed);
        assert_eq!(s2.begin(&p, NOW), Begin::Queued);
        assert_eq!(s.output("nope").unwrap_err().code, ErrorCode::UnknownReference);
        s.ingest(InputKind::Qrels, "q", QRELS, NOW).unwrap();
    }

    #[test]
    fn embeddings_need_queries() {
        let mut s = session();
        let err = s.ingest(InputKind::Embeddings, "e", b"q1\t1,0\n", NOW).unwrap_err();
        assert_eq!(err.code, ErrorCode::MissingInputs);
    }
}
