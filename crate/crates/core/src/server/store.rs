use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Serialize};

use crate::engine::{AnalysisOutput, AnalysisRequest, InputKind};
use crate::error::{fail, Error, ErrorCode, Result};
use crate::report::{export_session_json, import_session_json};
use crate::session::{AnalysisSession, Begin, InputDigest, JobState, Prepared, SessionSummary};
use crate::trec_io::ValidationReport;

pub const DEFAULT_MAX_UPLOAD: usize = 512 * 1024 * 1024;
const SESSION_FILE: &str = "session.json";

/// How analyses run once registered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    /// On a worker thread; callers poll for completion.
    #[default]
    Background,
    /// Before `run_analysis` returns.
    Inline,
    /// Queued until [`SessionStore::run_queued`] is called.
    Manual,
}

type Clock = Arc<dyn Fn() -> String + Send + Sync>;

pub fn utc_now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// Reference and state returned when an analysis is requested.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisTicket {
    pub reference: String,
    pub state: JobState,
}

/// A stored result as served to clients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultPayload {
    pub reference: String,
    pub kind: String,
    pub request: AnalysisRequest,
    pub inputs: Vec<InputDigest>,
    pub state: JobState,
    pub created_at: String,
    pub completed_at: Option<String>,
    pub output: AnalysisOutput,
}

type Shared = Arc<Mutex<AnalysisSession>>;

/// Sessions kept in memory and mirrored to `<root>/<session_id>/session.json`.
pub struct SessionStore {
    root: PathBuf,
    sessions: RwLock<HashMap<String, Shared>>,
    execution: Execution,
    queued: Mutex<Vec<(String, Prepared)>>,
    clock: Clock,
    max_upload: usize,
}

fn storage(context: &str, e: impl std::fmt::Display) -> Error {
    Error::new(ErrorCode::StorageFailure, format!("{context}: {e}"))
}

fn persist(root: &Path, session: &AnalysisSession) -> Result<()> {
    let dir = root.join(&session.session_id);
    fs::create_dir_all(&dir).map_err(|e| storage("cannot create session directory", e))?;
    let body = export_session_json(session)?;
    let tmp = dir.join(format!("{SESSION_FILE}.tmp"));
    fs::write(&tmp, body).map_err(|e| storage("cannot write session", e))?;
    fs::rename(&tmp, dir.join(SESSION_FILE)).map_err(|e| storage("cannot replace session", e))
}

fn lock(session: &Shared) -> std::sync::MutexGuard<'_, AnalysisSession> {
    session.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

fn compute(root: &Path, session: &Shared, prepared: &Prepared, clock: &Clock) {
    let snapshot = {
        let mut s = lock(session);
        s.set_state(&prepared.reference, JobState::Running);
        s.snapshot(prepared)
    };
    let outcome = snapshot.execute(&prepared.request);
    let mut s = lock(session);
    s.finish(&prepared.reference, outcome, &clock());
    if let Err(e) = persist(root, &s) {
        tracing::error!(session = %s.session_id, "{}", e.message);
    }
}

impl SessionStore {
    /// Opens (creating if needed) a persistence root and reloads every
    /// session in it. Work that was queued or running when the previous
    /// process stopped is marked failed.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        Self::open_with(root, Execution::Background, DEFAULT_MAX_UPLOAD)
    }

    pub fn open_with(root: impl Into<PathBuf>, execution: Execution, max_upload: usize) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| storage("cannot create data directory", e))?;
        let probe = root.join(".write-probe");
        fs::write(&probe, b"").map_err(|e| storage("data directory is not writable", e))?;
        let _ = fs::remove_file(&probe);

        let clock: Clock = Arc::new(utc_now);
        let mut sessions = HashMap::new();
        for entry in fs::read_dir(&root).map_err(|e| storage("cannot list data directory", e))? {
            let path = entry.map_err(|e| storage("cannot list data directory", e))?.path().join(SESSION_FILE);
            let Ok(raw) = fs::read(&path) else { continue };
            match import_session_json(&raw) {
                Ok(mut session) => {
                    if session.fail_pending(&clock()) > 0 {
                        persist(&root, &session)?;
                    }
                    sessions.insert(session.session_id.clone(), Arc::new(Mutex::new(session)));
                }
                Err(e) => tracing::warn!(path = %path.display(), "skipping unreadable session: {}", e.message),
            }
        }
        Ok(SessionStore {
            root,
            sessions: RwLock::new(sessions),
            execution,
            queued: Mutex::new(Vec::new()),
            clock,
            max_upload,
        })
    }

    /// Replaces the timestamp source.
    pub fn with_clock(mut self, clock: impl Fn() -> String + Send + Sync + 'static) -> Self {
        self.clock = Arc::new(clock);
        self
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn max_upload(&self) -> usize {
        self.max_upload
    }

    pub fn now(&self) -> String {
        (self.clock)()
    }

    fn get(&self, id: &str) -> Result<Shared> {
        self.sessions
            .read()
            .unwrap_or_else(|p| p.into_inner())
            .get(id)
            .cloned()
            .ok_or_else(|| Error::new(ErrorCode::UnknownSession, format!("no session '{id}'")))
    }

    pub fn session_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.sessions.read().unwrap_or_else(|p| p.into_inner()).keys().cloned().collect();
        ids.sort();
        ids
    }

    pub fn create_session(&self) -> Result<String> {
        let mut sessions = self.sessions.write().unwrap_or_else(|p| p.into_inner());
        let id = loop {
            let candidate = uuid::Uuid::new_v4().simple().to_string();
            if !sessions.contains_key(&candidate) && !self.root.join(&candidate).exists() {
                break candidate;
            }
        };
        let session = AnalysisSession::new(id.clone(), &self.now());
        persist(&self.root, &session)?;
        sessions.insert(id.clone(), Arc::new(Mutex::new(session)));
        Ok(id)
    }

    pub fn ingest_file(&self, id: &str, kind: InputKind, name: &str, raw: &[u8]) -> Result<ValidationReport> {
        if raw.len() > self.max_upload {
            return fail(
                ErrorCode::PayloadTooLarge,
                format!("upload of {} bytes exceeds the {} byte limit", raw.len(), self.max_upload),
            );
        }
        let shared = self.get(id)?;
        let mut session = lock(&shared);
        let before = session.clone();
        let report = session.ingest(kind, name, raw, &self.now())?;
        if let Err(e) = persist(&self.root, &session) {
            *session = before;
            return Err(e);
        }
        Ok(report)
    }

    pub fn run_analysis(&self, id: &str, request: &AnalysisRequest) -> Result<AnalysisTicket> {
        let shared = self.get(id)?;
        let prepared = {
            let mut session = lock(&shared);
            let prepared = session.prepare(request)?;
            if let Begin::Existing(state) = session.begin(&prepared, &self.now()) {
                return Ok(AnalysisTicket {
                    reference: prepared.reference,
                    state,
                });
            }
            persist(&self.root, &session)?;
            prepared
        };
        let reference = prepared.reference.clone();
        match self.execution {
            Execution::Inline => compute(&self.root, &shared, &prepared, &self.clock),
            Execution::Manual => self.queued.lock().unwrap_or_else(|p| p.into_inner()).push((id.to_owned(), prepared)),
            Execution::Background => {
                let (root, clock) = (self.root.clone(), self.clock.clone());
                std::thread::spawn(move || compute(&root, &shared, &prepared, &clock));
            }
        }
        let state = self.state(id, &reference)?;
        Ok(AnalysisTicket { reference, state })
    }

    /// Executes every analysis held back in [`Execution::Manual`] mode.
    pub fn run_queued(&self) -> usize {
        let jobs = std::mem::take(&mut *self.queued.lock().unwrap_or_else(|p| p.into_inner()));
        let n = jobs.len();
        for (id, prepared) in jobs {
            if let Ok(shared) = self.get(&id) {
                compute(&self.root, &shared, &prepared, &self.clock);
            }
        }
        n
    }

    pub fn state(&self, id: &str, reference: &str) -> Result<JobState> {
        let shared = self.get(id)?;
        let session = lock(&shared);
        Ok(session.stored(reference)?.state)
    }

    /// Blocks until the result leaves the queued/running states.
    pub fn wait(&self, id: &str, reference: &str, timeout: std::time::Duration) -> Result<JobState> {
        let start = std::time::Instant::now();
        loop {
            let state = self.state(id, reference)?;
            if !state.is_pending() || start.elapsed() >= timeout {
                return Ok(state);
            }
            std::thread::sleep(std::time::Duration::from_millis(5));
        }
    }

    pub fn get_result(&self, id: &str, reference: &str) -> Result<ResultPayload> {
        let shared = self.get(id)?;
        let session = lock(&shared);
        let output = session.output(reference)?.clone();
        let stored = session.stored(reference)?;
        Ok(ResultPayload {
            reference: stored.reference.clone(),
            kind: stored.request.kind().to_owned(),
            request: stored.request.clone(),
            inputs: stored.inputs.clone(),
            state: stored.state,
            created_at: stored.created_at.clone(),
            completed_at: stored.completed_at.clone(),
            output,
        })
    }

    pub fn summary(&self, id: &str) -> Result<SessionSummary> {
        let shared = self.get(id)?;
        let session = lock(&shared);
        Ok(session.summary())
    }

    /// A consistent copy of the whole session, for rendering and export.
    pub fn snapshot(&self, id: &str) -> Result<AnalysisSession> {
        let shared = self.get(id)?;
        let session = lock(&shared);
        Ok(session.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const QRELS: &[u8] = b"q1 0 a 1\nq2 0 b 1\n";
    const RUN: &[u8] = b"q1 Q0 a 1 1.0 r\nq2 Q0 c 1 1.0 r\n";

    fn evaluate() -> AnalysisRequest {
        AnalysisRequest::from_json(serde_json::json!({"kind": "evaluate", "params": {"measures": ["AP"]}})).unwrap()
    }

    #[test]
    fn restart_keeps_results_and_fails_pending() {
        let dir = tempfile::tempdir().unwrap();
        let (id, done, pending) = {
            let store = SessionStore::open_with(dir.path(), Execution::Manual, DEFAULT_MAX_UPLOAD).unwrap();
            let id = store.create_session().unwrap();
            store.ingest_file(&id, InputKind::Qrels, "qrels", QRELS).unwrap();
            store.ingest_file(&id, InputKind::Run, "run", RUN).unwrap();
            let done = store.run_analysis(&id, &evaluate()).unwrap();
            assert_eq!(done.state, JobState::Queued);
            assert_eq!(store.get_result(&id, &done.reference).unwrap_err().code, ErrorCode::ResultPending);
            store.run_queued();
            let pending = store
                .run_analysis(&id, &AnalysisRequest::from_json(serde_json::json!({"kind": "pr_curve"})).unwrap())
                .unwrap();
            (id, done.reference, pending.reference)
        };
        let store = SessionStore::open(dir.path()).unwrap();
        assert_eq!(store.session_ids(), std::slice::from_ref(&id));
        assert!(store.get_result(&id, &done).is_ok());
        assert_eq!(store.get_result(&id, &pending).unwrap_err().code, ErrorCode::ResultFailed);
    }

    #[test]
    fn sessions_are_isolated() {
        let dir = tempfile::tempdir().unwrap();
        let store = SessionStore::open_with(dir.path(), Execution::Inline, DEFAULT_MAX_UPLOAD).unwrap();
        let a = store.create_session().unwrap();
        let b = store.create_session().unwrap();
        assert_ne!(a, b);
        store.ingest_file(&a, InputKind::Qrels, "qrels", QRELS).unwrap();
        store.ingest_file(&a, InputKind::Run, "run", RUN).unwrap();
        let t = store.run_analysis(&a, &evaluate()).unwrap();
        assert_eq!(t.state, JobState::Done);
        assert_eq!(store.get_result(&b, &t.reference).unwrap_err().code, ErrorCode::UnknownReference);
        assert_eq!(store.run_analysis(&b, &evaluate()).unwrap_err().code, ErrorCode::MissingInputs);
        assert_eq!(store.summary("nope").unwrap_err().code, ErrorCode::UnknownSession);
    }

    #[test]
    fn upload_limit() {
        let dir = tempfile::tempdir().unwrap();
        let store = SessionStore::open_with(dir.path(), Execution::Inline, 8).unwrap();
        let id = store.create_session().unwrap();
        assert_eq!(
            store.ingest_file(&id, InputKind::Qrels, "q", QRELS).unwrap_err().code,
            ErrorCode::PayloadTooLarge
        );
    }

    #[test]
    fn background_execution_completes() {
        let dir = tempfile::tempdir().unwrap();
        let store = SessionStore::open(dir.path()).unwrap();
        let id = store.create_session().unwrap();
        store.ingest_file(&id, InputKind::Qrels, "qrels", QRELS).unwrap();
        store.ingest_file(&id, InputKind::Run, "run", RUN).unwrap();
        let t = store.run_analysis(&id, &evaluate()).unwrap();
        let state = store.wait(&id, &t.reference, std::time::Duration::from_secs(10)).unwrap();
        assert_eq!(state, JobState::Done);
    }
}
