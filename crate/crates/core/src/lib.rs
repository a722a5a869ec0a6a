//! Evaluation workbench for TREC-style retrieval experiments.
//!
//! The crate parses query, qrels and run files, computes per-query and mean
//! effectiveness scores, runs paired significance tests and derives the
//! analyses behind four interactive reports (experiment performance,
//! query-level, query text and collection). Results are exported as CSV,
//! canonical JSON and a self-contained HTML summary, and are served over HTTP.

pub mod analysis;
pub mod cli;
pub mod engine;
pub mod error;
pub mod measures;
pub mod report;
pub mod server;
pub mod session;
pub mod stats;
pub mod textviz;
pub mod trec_io;

pub use error::{Error, ErrorCode, Result};
