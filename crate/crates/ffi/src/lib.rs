//! C ABI over the rankscope engine.
//!
//! Stores and matrices are opaque handles created by `*_parse` / `rankscope_evaluate`
//! and released with the matching `*_free`. Every fallible call returns a
//! [`RankscopeStatus`]; on failure the message and error code of the last
//! error on the calling thread are available from [`rankscope_last_error`]
//! and [`rankscope_last_error_code`]. Strings returned through out-pointers
//! are owned by the caller and must be released with [`rankscope_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use rankscope::engine::compare_runs;
use rankscope::measures::{evaluate, parse_measure_list, parse_measure_spec, EvalMatrix, MissingQueryPolicy};
use rankscope::report::{canonical_json, eval_table_csv};
use rankscope::stats::{CorrectionMethod, TestKind};
use rankscope::trec_io::{parse_qrels, parse_runs, QrelsStore, RunStore};
use rankscope::{Error, ErrorCode};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankscopeStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidInput = 3,
    InvalidMeasure = 4,
    NotFound = 5,
    Failed = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankscopePolicy {
    ZeroFill = 0,
    Intersect = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankscopeTest {
    TTest = 0,
    Wilcoxon = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankscopeCorrection {
    Holm = 0,
    Bonferroni = 1,
}

/// Parsed relevance judgments.
pub struct RankscopeQrels {
    inner: QrelsStore,
}

/// Runs parsed from one file.
pub struct RankscopeRuns {
    inner: Vec<RunStore>,
}

/// Per-query scores of runs under a set of measures.
pub struct RankscopeMatrix {
    inner: EvalMatrix,
}

struct LastError {
    code: CString,
    message: CString,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<LastError>> = const { RefCell::new(None) };
}

fn cstring(text: &str) -> CString {
    CString::new(text.replace('\0', " ")).expect("interior NULs removed")
}

fn set_error(code: &str, message: &str) {
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = Some(LastError {
            code: cstring(code),
            message: cstring(message),
        })
    });
}

fn status_of(code: ErrorCode) -> RankscopeStatus {
    use ErrorCode::*;
    match code {
        UnknownMeasure | MissingCutoff | UnexpectedCutoff | InvalidCutoff | InvalidThreshold => {
            RankscopeStatus::InvalidMeasure
        }
        EmptyFile | UnknownFormat | MalformedFile | InvalidInput | InvalidParameter => RankscopeStatus::InvalidInput,
        UnknownRun | DocNotFound | UnknownReference | UnknownSession => RankscopeStatus::NotFound,
        _ => RankscopeStatus::Failed,
    }
}

enum Failure {
    Status(RankscopeStatus, &'static str, String),
    Domain(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Domain(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> RankscopeStatus {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RankscopeStatus::Ok,
        Ok(Err(Failure::Status(status, code, message))) => {
            set_error(code, &message);
            status
        }
        Ok(Err(Failure::Domain(e))) => {
            set_error(e.code.as_str(), &e.to_string());
            status_of(e.code)
        }
        Err(_) => {
            set_error("PANIC", "internal error");
            RankscopeStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure::Status(RankscopeStatus::NullPointer, "NULL_POINTER", format!("{what} is null"))
}

unsafe fn bytes<'a>(data: *const u8, len: usize) -> Result<&'a [u8], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(null("data"));
    }
    Ok(std::slice::from_raw_parts(data, len))
}

unsafe fn text<'a>(s: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| Failure::Status(RankscopeStatus::InvalidUtf8, "INVALID_UTF8", format!("{what} is not UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn put_string(out: *mut *mut c_char, value: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = cstring(value).into_raw();
    Ok(())
}

unsafe fn put_f64(out: *mut f64, value: f64) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = value;
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rankscope_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL. The pointer stays
/// valid until the next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn rankscope_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |e| e.message.as_ptr()))
}

/// Error code name (for example `MISSING_CUTOFF`) of the last failed call on
/// this thread, or NULL.
#[no_mangle]
pub extern "C" fn rankscope_last_error_code() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |e| e.code.as_ptr()))
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn rankscope_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a qrels file held in memory.
///
/// # Safety
/// `data` must point to `len` readable bytes and `out` to writable storage.
#[no_mangle]
pub unsafe extern "C" fn rankscope_qrels_parse(
    data: *const u8,
    len: usize,
    out: *mut *mut RankscopeQrels,
) -> RankscopeStatus {
    guard(|| {
        let parsed = parse_qrels(bytes(data, len)?).map_err(|r| r.to_error())?;
        put(out, RankscopeQrels { inner: parsed.value })
    })
}

/// Number of judged queries.
///
/// # Safety
/// `qrels` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rankscope_qrels_query_count(qrels: *const RankscopeQrels) -> usize {
    qrels.as_ref().map_or(0, |q| q.inner.judgments.len())
}

/// # Safety
/// `qrels` must be NULL or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn rankscope_qrels_free(qrels: *mut RankscopeQrels) {
    if !qrels.is_null() {
        drop(Box::from_raw(qrels));
    }
}

/// Parses a run file held in memory; a file may contain several runs.
///
/// # Safety
/// `data` must point to `len` readable bytes and `out` to writable storage.
#[no_mangle]
pub unsafe extern "C" fn rankscope_runs_parse(
    data: *const u8,
    len: usize,
    out: *mut *mut RankscopeRuns,
) -> RankscopeStatus {
    guard(|| {
        let parsed = parse_runs(bytes(data, len)?).map_err(|r| r.to_error())?;
        put(out, RankscopeRuns { inner: parsed.value })
    })
}

/// Number of runs in the handle.
///
/// # Safety
/// `runs` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rankscope_runs_count(runs: *const RankscopeRuns) -> usize {
    runs.as_ref().map_or(0, |r| r.inner.len())
}

/// Copies the id of run `index` into a new string.
///
/// # Safety
/// `runs` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rankscope_runs_id(
    runs: *const RankscopeRuns,
    index: usize,
    out: *mut *mut c_char,
) -> RankscopeStatus {
    guard(|| {
        let runs = handle(runs, "runs")?;
        let run = runs.inner.get(index).ok_or_else(|| {
            Failure::Status(RankscopeStatus::NotFound, "UNKNOWN_RUN", format!("no run at index {index}"))
        })?;
        put_string(out, &run.run_id)
    })
}

/// # Safety
/// `runs` must be NULL or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn rankscope_runs_free(runs: *mut RankscopeRuns) {
    if !runs.is_null() {
        drop(Box::from_raw(runs));
    }
}

/// Scores every run under a comma-separated measure list such as
/// `"AP,nDCG@10"`.
///
/// # Safety
/// Handles must be live, `measures` a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rankscope_evaluate(
    qrels: *const RankscopeQrels,
    runs: *const RankscopeRuns,
    measures: *const c_char,
    policy: RankscopePolicy,
    out: *mut *mut RankscopeMatrix,
) -> RankscopeStatus {
    guard(|| {
        let qrels = handle(qrels, "qrels")?;
        let runs = handle(runs, "runs")?;
        let specs = parse_measure_list(text(measures, "measures")?)?;
        let policy = match policy {
            RankscopePolicy::ZeroFill => MissingQueryPolicy::ZeroFill,
            RankscopePolicy::Intersect => MissingQueryPolicy::Intersect,
        };
        let matrix = evaluate(&runs.inner, &qrels.inner, &specs, policy)?;
        put(out, RankscopeMatrix { inner: matrix })
    })
}

fn unknown_cell(what: String) -> Failure {
    Failure::Status(RankscopeStatus::NotFound, "NOT_FOUND", what)
}

/// Mean of one run under one measure.
///
/// # Safety
/// `matrix` must be live, strings NUL-terminated and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rankscope_matrix_mean(
    matrix: *const RankscopeMatrix,
    run_id: *const c_char,
    measure: *const c_char,
    out: *mut f64,
) -> RankscopeStatus {
    guard(|| {
        let m = &handle(matrix, "matrix")?.inner;
        let run_id = text(run_id, "run_id")?;
        let spec = parse_measure_spec(text(measure, "measure")?)?;
        let value = m
            .mean(run_id, &spec)
            .ok_or_else(|| unknown_cell(format!("no mean for run '{run_id}' and measure {spec}")))?;
        put_f64(out, value)
    })
}

/// Score of one run on one query under one measure.
///
/// # Safety
/// `matrix` must be live, strings NUL-terminated and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rankscope_matrix_score(
    matrix: *const RankscopeMatrix,
    run_id: *const c_char,
    measure: *const c_char,
    qid: *const c_char,
    out: *mut f64,
) -> RankscopeStatus {
    guard(|| {
        let m = &handle(matrix, "matrix")?.inner;
        let run_id = text(run_id, "run_id")?;
        let qid = text(qid, "qid")?;
        let spec = parse_measure_spec(text(measure, "measure")?)?;
        let value = m
            .score(run_id, &spec, qid)
            .ok_or_else(|| unknown_cell(format!("no score for run '{run_id}', measure {spec}, query '{qid}'")))?;
        put_f64(out, value)
    })
}

/// The `run_id,measure,qid,score` CSV table.
///
/// # Safety
/// `matrix` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rankscope_matrix_csv(matrix: *const RankscopeMatrix, out: *mut *mut c_char) -> RankscopeStatus {
    guard(|| {
        let csv = eval_table_csv(&handle(matrix, "matrix")?.inner);
        put_string(out, &String::from_utf8_lossy(&csv))
    })
}

/// The matrix as canonical JSON.
///
/// # Safety
/// `matrix` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rankscope_matrix_json(matrix: *const RankscopeMatrix, out: *mut *mut c_char) -> RankscopeStatus {
    guard(|| {
        let json = canonical_json(&handle(matrix, "matrix")?.inner)?;
        put_string(out, &json)
    })
}

/// Tests every run against `baseline` and returns the comparison as
/// canonical JSON.
///
/// # Safety
/// `matrix` must be live, `baseline` NUL-terminated and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rankscope_compare_json(
    matrix: *const RankscopeMatrix,
    baseline: *const c_char,
    test: RankscopeTest,
    correction: RankscopeCorrection,
    alpha: f64,
    out: *mut *mut c_char,
) -> RankscopeStatus {
    guard(|| {
        let m = &handle(matrix, "matrix")?.inner;
        let test = match test {
            RankscopeTest::TTest => TestKind::TTest,
            RankscopeTest::Wilcoxon => TestKind::Wilcoxon,
        };
        let correction = match correction {
            RankscopeCorrection::Holm => CorrectionMethod::Holm,
            RankscopeCorrection::Bonferroni => CorrectionMethod::Bonferroni,
        };
        let comparison = compare_runs(m, text(baseline, "baseline")?, test, correction, alpha)?;
        put_string(out, &canonical_json(&comparison.rows)?)
    })
}

/// # Safety
/// `matrix` must be NULL or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn rankscope_matrix_free(matrix: *mut RankscopeMatrix) {
    if !matrix.is_null() {
        drop(Box::from_raw(matrix));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const QRELS: &[u8] = b"q1 0 d1 1\nq1 0 d2 0\nq1 0 d3 1\nq2 0 d4 1\n";
    const RUNS: &[u8] = b"q1 Q0 d1 1 3 a\nq1 Q0 d2 2 2 a\nq1 Q0 d3 3 1 a\nq2 Q0 d4 1 1 a\n\
q1 Q0 d2 1 3 b\nq1 Q0 d1 2 2 b\nq2 Q0 d9 1 1 b\n";

    fn last_error_code() -> String {
        let p = rankscope_last_error_code();
        assert!(!p.is_null());
        unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_owned()
    }

    struct Fixture {
        qrels: *mut RankscopeQrels,
        runs: *mut RankscopeRuns,
        matrix: *mut RankscopeMatrix,
    }

    impl Drop for Fixture {
        fn drop(&mut self) {
            unsafe {
                rankscope_matrix_free(self.matrix);
                rankscope_runs_free(self.runs);
                rankscope_qrels_free(self.qrels);
            }
        }
    }

    fn fixture() -> Fixture {
        let mut f = Fixture {
            qrels: ptr::null_mut(),
            runs: ptr::null_mut(),
            matrix: ptr::null_mut(),
        };
        unsafe {
            assert_eq!(rankscope_qrels_parse(QRELS.as_ptr(), QRELS.len(), &mut f.qrels), RankscopeStatus::Ok);
            assert_eq!(rankscope_runs_parse(RUNS.as_ptr(), RUNS.len(), &mut f.runs), RankscopeStatus::Ok);
            let measures = CString::new("AP,P@2").unwrap();
            assert_eq!(
                rankscope_evaluate(f.qrels, f.runs, measures.as_ptr(), RankscopePolicy::ZeroFill, &mut f.matrix),
                RankscopeStatus::Ok
            );
        }
        f
    }

    #[test]
    fn evaluate_and_read_back() {
        let f = fixture();
        unsafe {
            assert_eq!(rankscope_qrels_query_count(f.qrels), 2);
            assert_eq!(rankscope_runs_count(f.runs), 2);
            let mut id = ptr::null_mut();
            assert_eq!(rankscope_runs_id(f.runs, 1, &mut id), RankscopeStatus::Ok);
            assert_eq!(CStr::from_ptr(id).to_str().unwrap(), "b");
            rankscope_string_free(id);

            let (run, ap, q1) = (CString::new("a").unwrap(), CString::new("AP").unwrap(), CString::new("q1").unwrap());
            let mut v = 0.0;
            assert_eq!(rankscope_matrix_score(f.matrix, run.as_ptr(), ap.as_ptr(), q1.as_ptr(), &mut v), RankscopeStatus::Ok);
            assert!((v - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-12);
            assert_eq!(rankscope_matrix_mean(f.matrix, run.as_ptr(), ap.as_ptr(), &mut v), RankscopeStatus::Ok);
            assert!((v - (5.0 / 6.0 + 1.0) / 2.0).abs() < 1e-12);

            let mut csv = ptr::null_mut();
            assert_eq!(rankscope_matrix_csv(f.matrix, &mut csv), RankscopeStatus::Ok);
            let text = CStr::from_ptr(csv).to_str().unwrap().to_owned();
            rankscope_string_free(csv);
            assert!(text.starts_with("run_id,measure,qid,score\n"));
            assert_eq!(text.lines().count(), 1 + 2 * 2 * 3);

            let mut json = ptr::null_mut();
            assert_eq!(rankscope_matrix_json(f.matrix, &mut json), RankscopeStatus::Ok);
            let value: serde_json::Value = serde_json::from_str(CStr::from_ptr(json).to_str().unwrap()).unwrap();
            rankscope_string_free(json);
            assert_eq!(value["run_ids"], serde_json::json!(["a", "b"]));
        }
    }

    #[test]
    fn comparison_json() {
        let f = fixture();
        unsafe {
            let base = CString::new("a").unwrap();
            let mut out = ptr::null_mut();
            let status =
                rankscope_compare_json(f.matrix, base.as_ptr(), RankscopeTest::TTest, RankscopeCorrection::Holm, 0.05, &mut out);
            assert_eq!(status, RankscopeStatus::Ok);
            let rows: serde_json::Value = serde_json::from_str(CStr::from_ptr(out).to_str().unwrap()).unwrap();
            rankscope_string_free(out);
            assert_eq!(rows.as_array().unwrap().len(), 2);

            let typo = CString::new("zzz").unwrap();
            let status =
                rankscope_compare_json(f.matrix, typo.as_ptr(), RankscopeTest::TTest, RankscopeCorrection::Holm, 0.05, &mut out);
            assert_eq!(status, RankscopeStatus::NotFound);
            assert_eq!(last_error_code(), "UNKNOWN_RUN");
        }
    }

    #[test]
    fn errors_are_reported() {
        unsafe {
            let mut q = ptr::null_mut();
            let bad = b"q1 0 d1 high\n";
            assert_eq!(rankscope_qrels_parse(bad.as_ptr(), bad.len(), &mut q), RankscopeStatus::InvalidInput);
            assert!(q.is_null());
            assert_eq!(last_error_code(), "EMPTY_FILE");
            assert!(!rankscope_last_error().is_null());

            assert_eq!(rankscope_qrels_parse(QRELS.as_ptr(), QRELS.len(), ptr::null_mut()), RankscopeStatus::NullPointer);

            let f = fixture();
            let measures = CString::new("P").unwrap();
            let mut m = ptr::null_mut();
            let status = rankscope_evaluate(f.qrels, f.runs, measures.as_ptr(), RankscopePolicy::ZeroFill, &mut m);
            assert_eq!(status, RankscopeStatus::InvalidMeasure);
            assert_eq!(last_error_code(), "MISSING_CUTOFF");

            let mut v = 0.0;
            let (run, ap) = (CString::new("a").unwrap(), CString::new("AP").unwrap());
            assert_eq!(rankscope_matrix_mean(f.matrix, run.as_ptr(), ap.as_ptr(), &mut v), RankscopeStatus::Ok);
            assert!(rankscope_last_error().is_null());
            assert_eq!(
                rankscope_matrix_mean(ptr::null(), run.as_ptr(), ap.as_ptr(), &mut v),
                RankscopeStatus::NullPointer
            );
        }
    }

    #[test]
    fn version_string() {
        let v = unsafe { CStr::from_ptr(rankscope_version()) };
        assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
    }
}
