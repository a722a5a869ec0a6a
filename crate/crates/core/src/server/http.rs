use std::sync::Arc;
use std::time::Instant;

use axum::body::Bytes;
use axum::extract::rejection::BytesRejection;
use axum::extract::{DefaultBodyLimit, Path, Query, Request, State};
use axum::http::{header, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde::{Deserialize, Serialize};

use super::store::SessionStore;
use crate::engine::{AnalysisOutput, AnalysisRequest, InputKind};
use crate::error::{Error, ErrorCode};
use crate::report::{
    canonical_json, eval_table_csv, export_session_json, parse_sections, render_html_report,
    significance_table_csv, Section,
};

/// An [`Error`] rendered as an HTTP response.
pub struct ApiError(pub Error);

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError(e)
    }
}

pub fn status_for(code: ErrorCode) -> StatusCode {
    use ErrorCode::*;
    match code {
        UnknownSession | UnknownReference | UnknownRun | DocNotFound => StatusCode::NOT_FOUND,
        ResultPending => StatusCode::ACCEPTED,
        DuplicateRunName | MissingInputs => StatusCode::CONFLICT,
        PayloadTooLarge => StatusCode::PAYLOAD_TOO_LARGE,
        StorageFailure => StatusCode::INTERNAL_SERVER_ERROR,
        UnknownMeasure | MissingCutoff | UnexpectedCutoff | InvalidCutoff | InvalidThreshold | InvalidParameter
        | InvalidDepth => StatusCode::BAD_REQUEST,
        _ => StatusCode::UNPROCESSABLE_ENTITY,
    }
}

fn json_response<T: Serialize>(status: StatusCode, value: &T) -> Response {
    match canonical_json(value) {
        Ok(body) => (status, [(header::CONTENT_TYPE, "application/json")], body).into_response(),
        Err(e) => ApiError(e).into_response(),
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = status_for(self.0.code);
        let body = canonical_json(&self.0).unwrap_or_else(|_| {
            format!("{{\"code\":\"{}\",\"details\":null,\"message\":\"\"}}", self.0.code.as_str())
        });
        (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
    }
}

type ApiResult = Result<Response, ApiError>;

async fn blocking<T, F>(f: F) -> Result<T, ApiError>
where
    F: FnOnce() -> crate::Result<T> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError(Error::new(ErrorCode::StorageFailure, format!("worker failed: {e}"))))?
        .map_err(ApiError)
}

#[derive(Serialize)]
struct Created {
    session_id: String,
}

async fn create_session(State(store): State<Arc<SessionStore>>) -> ApiResult {
    let session_id = blocking(move || store.create_session()).await?;
    Ok(json_response(StatusCode::CREATED, &Created { session_id }))
}

#[derive(Deserialize)]
struct FileQuery {
    kind: String,
    name: Option<String>,
}

async fn upload_file(
    State(store): State<Arc<SessionStore>>,
    Path(id): Path<String>,
    Query(q): Query<FileQuery>,
    body: Result<Bytes, BytesRejection>,
) -> ApiResult {
    let body = body.map_err(|rejection| {
        let code = if rejection.status() == StatusCode::PAYLOAD_TOO_LARGE {
            ErrorCode::PayloadTooLarge
        } else {
            ErrorCode::InvalidInput
        };
        Error::new(code, rejection.body_text())
    })?;
    let kind: InputKind = q.kind.parse()?;
    let name = q.name.unwrap_or_else(|| kind.as_str().to_owned());
    let report = blocking(move || store.ingest_file(&id, kind, &name, &body)).await?;
    Ok(json_response(StatusCode::OK, &report))
}

async fn session_summary(State(store): State<Arc<SessionStore>>, Path(id): Path<String>) -> ApiResult {
    let summary = blocking(move || store.summary(&id)).await?;
    Ok(json_response(StatusCode::OK, &summary))
}

async fn request_analysis(State(store): State<Arc<SessionStore>>, Path(id): Path<String>, body: Bytes) -> ApiResult {
    let value: serde_json::Value = serde_json::from_slice(&body)
        .map_err(|e| Error::new(ErrorCode::InvalidParameter, format!("request body is not JSON: {e}")))?;
    let request = AnalysisRequest::from_json(value)?;
    let ticket = blocking(move || store.run_analysis(&id, &request)).await?;
    Ok(json_response(StatusCode::ACCEPTED, &ticket))
}

async fn get_result(State(store): State<Arc<SessionStore>>, Path((id, reference)): Path<(String, String)>) -> ApiResult {
    let payload = blocking(move || store.get_result(&id, &reference)).await?;
    Ok(json_response(StatusCode::OK, &payload))
}

async fn get_result_csv(
    State(store): State<Arc<SessionStore>>,
    Path((id, reference)): Path<(String, String)>,
) -> ApiResult {
    let payload = blocking(move || store.get_result(&id, &reference)).await?;
    let body = match &payload.output {
        AnalysisOutput::Evaluate(m) => eval_table_csv(m),
        AnalysisOutput::Compare(c) => significance_table_csv(&c.rows)?,
        _ => {
            return Err(Error::new(
                ErrorCode::InvalidParameter,
                format!("no CSV table for '{}' results", payload.kind),
            )
            .into())
        }
    };
    Ok((StatusCode::OK, [(header::CONTENT_TYPE, "text/csv; charset=utf-8")], body).into_response())
}

#[derive(Deserialize)]
struct ReportQuery {
    sections: Option<String>,
    timestamp: Option<String>,
}

async fn get_report(
    State(store): State<Arc<SessionStore>>,
    Path(id): Path<String>,
    Query(q): Query<ReportQuery>,
) -> ApiResult {
    let sections = match &q.sections {
        Some(text) => parse_sections(text)?,
        None => Section::ALL.to_vec(),
    };
    let html = blocking(move || {
        let session = store.snapshot(&id)?;
        let generated_at = q.timestamp.unwrap_or_else(|| store.now());
        render_html_report(&session, &sections, &generated_at)
    })
    .await?;
    Ok((StatusCode::OK, [(header::CONTENT_TYPE, "text/html; charset=utf-8")], html).into_response())
}

async fn export(State(store): State<Arc<SessionStore>>, Path(id): Path<String>) -> ApiResult {
    let body = blocking(move || export_session_json(&store.snapshot(&id)?)).await?;
    Ok((StatusCode::OK, [(header::CONTENT_TYPE, "application/json")], body).into_response())
}

async fn not_found() -> Response {
    let mut response = ApiError(Error::new(ErrorCode::InvalidParameter, "no such route")).into_response();
    *response.status_mut() = StatusCode::NOT_FOUND;
    response
}

async fn log_requests(request: Request, next: Next) -> Response {
    let method = request.method().clone();
    let path = request.uri().path().to_owned();
    let start = Instant::now();
    let response = next.run(request).await;
    tracing::info!(
        %method,
        %path,
        status = response.status().as_u16(),
        elapsed_ms = start.elapsed().as_millis() as u64,
        "request"
    );
    response
}

/// The HTTP API over a session store.
pub fn router(store: Arc<SessionStore>) -> Router {
    let limit = store.max_upload();
    Router::new()
        .route("/api/sessions", post(create_session))
        .route("/api/sessions/{id}", get(session_summary))
        .route(
            "/api/sessions/{id}/files",
            post(upload_file).layer(DefaultBodyLimit::max(limit)),
        )
        .route("/api/sessions/{id}/analyses", post(request_analysis))
        .route("/api/sessions/{id}/results/{reference}", get(get_result))
        .route("/api/sessions/{id}/results/{reference}/csv", get(get_result_csv))
        .route("/api/sessions/{id}/report", get(get_report))
        .route("/api/sessions/{id}/export", get(export))
        .fallback(not_found)
        .layer(middleware::from_fn(log_requests))
        .with_state(store)
}

/// Serves the API on `listener` until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    store: Arc<SessionStore>,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(store)).with_graceful_shutdown(shutdown).await
}
