//! Deterministic exports: CSV tables, canonical JSON session dumps and a
//! self-contained HTML report.

mod csv;
mod html;
mod json;

pub use self::csv::{eval_table_csv, significance_table_csv};
pub(crate) use html::label;
pub use html::{parse_sections, render_html_report, ManifestEntry, ReportManifest, Section};
pub use json::{canonical_json, export_session_json, format_float, import_session_json};
