//! Analyses layered on top of the evaluation matrix and the qrels: PR curves,
//! per-query deltas, query-length correlations and collection statistics.

mod collection;
mod correlation;
mod delta;
mod length;
mod prcurve;

pub use collection::{
    document_rank_trace, multi_query_documents, qrels_distribution, DocRankTrace, JudgmentCounts,
    QrelsDistribution, SharedDocument,
};
pub use correlation::{correlation, Correlation, CorrelationMethod};
pub use delta::{per_query_delta, QueryDelta, QueryDeltaReport, DEFAULT_TIE_BAND};
pub use length::{query_length_analysis, token_length, LengthAnalysis, LengthBucket, QueryLengthPoint};
pub use prcurve::{interpolated_pr_curve, recall_levels, CurveScope, PRCurve, PRCurves, RECALL_LEVELS};
