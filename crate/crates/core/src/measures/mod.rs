//! Retrieval effectiveness measures and the evaluation matrix.

mod matrix;
mod metrics;
mod spec;

pub use matrix::{evaluate, evaluate_with, EvalMatrix, MeasureColumn, MissingQueryPolicy};
pub(crate) use matrix::mean;
pub use metrics::{
    average_precision, bpref, compute, judged_at_k, ndcg, precision_at_k, recall_at_k,
    reciprocal_rank, Judgments,
};
pub use spec::{parse_measure_list, parse_measure_spec, Family, Gain, MeasureSpec};
