//! HTTP service over persisted analysis sessions.

mod http;
mod store;

pub use http::{router, serve, status_for, ApiError};
pub use store::{
    utc_now, AnalysisTicket, Execution, ResultPayload, SessionStore, DEFAULT_MAX_UPLOAD,
};
