//! Typed analysis requests and their execution against parsed inputs.
//!
//! The HTTP server, the CLI and the FFI layer all route work through
//! [`execute`], so every front end produces the same numbers.

use serde::{Deserialize, Serialize};

use crate::analysis::{
    self, DocRankTrace, LengthAnalysis, PRCurves, QrelsDistribution, QueryDeltaReport, SharedDocument,
};
use crate::error::{fail, Error, ErrorCode, Result};
use crate::measures::{evaluate, parse_measure_list, parse_measure_spec, EvalMatrix, MeasureSpec, MissingQueryPolicy};
use crate::stats::{
    bootstrap_ci, correct, paired_effect_size, run_test, CorrectionMethod, PairedSample, TestKind, TestResult,
};
use crate::textviz::{
    default_stopwords, nearest_queries, pca_project, tfidf_vectors, token_frequencies, Neighbour, Projection,
    QueryVectors, TokenFrequencies,
};
use crate::trec_io::{QrelsStore, QuerySet, RunStore, DEFAULT_REL_THRESHOLD};

pub const DEFAULT_MEASURES: &str = "AP,nDCG@10,P@10,R@100,RR,Bpref";
pub const DEFAULT_ALPHA: f64 = 0.05;
pub const DEFAULT_SEED: u64 = 7;

/// Accepts either `["AP", "P@10"]` or `"AP,P@10"`.
fn measure_list<'de, D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Vec<String>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Form {
        Text(String),
        List(Vec<String>),
    }
    Ok(match Form::deserialize(de)? {
        Form::Text(text) => text.split(',').map(|m| m.trim().to_owned()).filter(|m| !m.is_empty()).collect(),
        Form::List(list) => list,
    })
}

fn default_measures() -> Vec<String> {
    DEFAULT_MEASURES.split(',').map(str::to_owned).collect()
}
fn default_measure() -> String {
    "AP".into()
}
fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}
fn default_threshold() -> i64 {
    DEFAULT_REL_THRESHOLD
}
fn default_tie_band() -> f64 {
    analysis::DEFAULT_TIE_BAND
}
fn default_buckets() -> usize {
    4
}
fn default_min_token_len() -> usize {
    crate::textviz::DEFAULT_MIN_TOKEN_LEN
}
fn default_dims() -> usize {
    2
}
fn default_neighbours() -> usize {
    5
}
fn default_min_queries() -> usize {
    2
}
fn default_confidence() -> f64 {
    0.95
}
fn default_iterations() -> usize {
    2000
}
fn default_seed() -> u64 {
    DEFAULT_SEED
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateParams {
    #[serde(default = "default_measures", deserialize_with = "measure_list")]
    pub measures: Vec<String>,
    #[serde(default)]
    pub policy: MissingQueryPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareParams {
    #[serde(default = "default_measures", deserialize_with = "measure_list")]
    pub measures: Vec<String>,
    /// Defaults to the first run.
    #[serde(default)]
    pub baseline: Option<String>,
    #[serde(default)]
    pub test: TestKind,
    #[serde(default)]
    pub correction: CorrectionMethod,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub policy: MissingQueryPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrCurveParams {
    /// Empty means every run.
    #[serde(default)]
    pub run_ids: Vec<String>,
    #[serde(default = "default_threshold")]
    pub rel_threshold: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryDeltaParams {
    #[serde(default)]
    pub baseline: Option<String>,
    #[serde(default)]
    pub comparison: Option<String>,
    #[serde(default = "default_measure")]
    pub measure: String,
    #[serde(default = "default_tie_band")]
    pub tie_band: f64,
    #[serde(default)]
    pub policy: MissingQueryPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryLengthParams {
    #[serde(default)]
    pub run_id: Option<String>,
    #[serde(default = "default_measure")]
    pub measure: String,
    #[serde(default = "default_buckets")]
    pub n_buckets: usize,
    #[serde(default)]
    pub policy: MissingQueryPolicy,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stopwords {
    #[default]
    English,
    None,
    Custom(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WordCloudParams {
    #[serde(default)]
    pub stopwords: Stopwords,
    #[serde(default = "default_min_token_len")]
    pub min_token_len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectionParams {
    /// Name of an uploaded embedding file; TF-IDF vectors when absent.
    #[serde(default)]
    pub embeddings: Option<String>,
    #[serde(default = "default_dims")]
    pub dims: usize,
    #[serde(default = "default_neighbours")]
    pub neighbours: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdParams {
    #[serde(default = "default_threshold")]
    pub rel_threshold: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SharedDocumentsParams {
    #[serde(default = "default_min_queries")]
    pub min_queries: usize,
    #[serde(default = "default_threshold")]
    pub rel_threshold: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DocTraceParams {
    pub doc_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BootstrapParams {
    #[serde(default = "default_measure")]
    pub measure: String,
    #[serde(default = "default_confidence")]
    pub confidence: f64,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub policy: MissingQueryPolicy,
}

/// One analysis with all of its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum AnalysisRequest {
    Evaluate(EvaluateParams),
    Compare(CompareParams),
    PrCurve(PrCurveParams),
    QueryDelta(QueryDeltaParams),
    QueryLength(QueryLengthParams),
    WordCloud(WordCloudParams),
    Projection(ProjectionParams),
    QrelsDistribution(ThresholdParams),
    SharedDocuments(SharedDocumentsParams),
    DocTrace(DocTraceParams),
    Bootstrap(BootstrapParams),
}

/// Input stores an analysis kind reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputKind {
    Queries,
    Qrels,
    Run,
    Embeddings,
}

impl InputKind {
    pub fn as_str(self) -> &'static str {
        match self {
            InputKind::Queries => "queries",
            InputKind::Qrels => "qrels",
            InputKind::Run => "run",
            InputKind::Embeddings => "embeddings",
        }
    }
}

impl std::str::FromStr for InputKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "queries" | "topics" => Ok(InputKind::Queries),
            "qrels" => Ok(InputKind::Qrels),
            "run" | "runs" => Ok(InputKind::Run),
            "embeddings" => Ok(InputKind::Embeddings),
            other => fail(ErrorCode::InvalidParameter, format!("unknown file kind '{other}'")),
        }
    }
}

fn canonical_measures(list: &[String]) -> Result<Vec<String>> {
    Ok(parse_measure_list(&list.join(","))?.iter().map(ToString::to_string).collect())
}

fn canonical_measure(text: &str) -> Result<String> {
    Ok(parse_measure_spec(text)?.to_string())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return fail(ErrorCode::InvalidParameter, format!("alpha {alpha} outside (0, 1)"));
    }
    Ok(())
}

impl AnalysisRequest {
    /// Parses a `{"kind": ..., "params": {...}}` body; `params` may be omitted.
    pub fn from_json(value: serde_json::Value) -> Result<Self> {
        let mut value = value;
        if let Some(obj) = value.as_object_mut() {
            obj.entry("params").or_insert_with(|| serde_json::json!({}));
        }
        serde_json::from_value(value)
            .map_err(|e| Error::new(ErrorCode::InvalidParameter, format!("invalid analysis request: {e}")))
    }

    pub fn kind(&self) -> &'static str {
        match self {
            AnalysisRequest::Evaluate(_) => "evaluate",
            AnalysisRequest::Compare(_) => "compare",
            AnalysisRequest::PrCurve(_) => "pr_curve",
            AnalysisRequest::QueryDelta(_) => "query_delta",
            AnalysisRequest::QueryLength(_) => "query_length",
            AnalysisRequest::WordCloud(_) => "word_cloud",
            AnalysisRequest::Projection(_) => "projection",
            AnalysisRequest::QrelsDistribution(_) => "qrels_distribution",
            AnalysisRequest::SharedDocuments(_) => "shared_documents",
            AnalysisRequest::DocTrace(_) => "doc_trace",
            AnalysisRequest::Bootstrap(_) => "bootstrap",
        }
    }

    /// Position in page order, used to sort results within a report section.
    pub fn kind_rank(&self) -> usize {
        match self {
            AnalysisRequest::Evaluate(_) => 0,
            AnalysisRequest::Compare(_) => 1,
            AnalysisRequest::PrCurve(_) => 2,
            AnalysisRequest::Bootstrap(_) => 3,
            AnalysisRequest::QueryDelta(_) => 4,
            AnalysisRequest::WordCloud(_) => 5,
            AnalysisRequest::QueryLength(_) => 6,
            AnalysisRequest::Projection(_) => 7,
            AnalysisRequest::QrelsDistribution(_) => 8,
            AnalysisRequest::SharedDocuments(_) => 9,
            AnalysisRequest::DocTrace(_) => 10,
        }
    }

    /// Stores the analysis reads.
    pub fn inputs(&self) -> Vec<InputKind> {
        use InputKind::*;
        match self {
            AnalysisRequest::Evaluate(_)
            | AnalysisRequest::Compare(_)
            | AnalysisRequest::PrCurve(_)
            | AnalysisRequest::QueryDelta(_)
            | AnalysisRequest::Bootstrap(_) => vec![Qrels, Run],
            AnalysisRequest::QueryLength(_) => vec![Queries, Qrels, Run],
            AnalysisRequest::WordCloud(_) => vec![Queries],
            AnalysisRequest::Projection(p) if p.embeddings.is_some() => vec![Queries, Embeddings],
            AnalysisRequest::Projection(_) => vec![Queries],
            AnalysisRequest::QrelsDistribution(_) | AnalysisRequest::SharedDocuments(_) => vec![Qrels],
            AnalysisRequest::DocTrace(_) => vec![Qrels, Run],
        }
    }

    /// Validates parameters and rewrites them into canonical form, so that
    /// equivalent requests (`map` vs `AP`) compare equal.
    pub fn canonicalize(&self) -> Result<Self> {
        let mut req = self.clone();
        match &mut req {
            AnalysisRequest::Evaluate(p) => p.measures = canonical_measures(&p.measures)?,
            AnalysisRequest::Compare(p) => {
                p.measures = canonical_measures(&p.measures)?;
                check_alpha(p.alpha)?;
            }
            AnalysisRequest::PrCurve(p) => {
                if p.rel_threshold < 1 {
                    return fail(ErrorCode::InvalidThreshold, "relevance threshold must be >= 1");
                }
            }
            AnalysisRequest::QueryDelta(p) => p.measure = canonical_measure(&p.measure)?,
            AnalysisRequest::QueryLength(p) => p.measure = canonical_measure(&p.measure)?,
            AnalysisRequest::WordCloud(p) => {
                if let Stopwords::Custom(words) = &mut p.stopwords {
                    *words = words
                        .iter()
                        .map(|w| w.trim().to_lowercase())
                        .filter(|w| !w.is_empty())
                        .collect::<std::collections::BTreeSet<_>>()
                        .into_iter()
                        .collect();
                }
            }
            AnalysisRequest::Projection(p) => {
                if !(2..=3).contains(&p.dims) {
                    return fail(ErrorCode::InvalidParameter, "dims must be 2 or 3");
                }
            }
            AnalysisRequest::QrelsDistribution(_) | AnalysisRequest::SharedDocuments(_) => {}
            AnalysisRequest::DocTrace(p) => {
                if p.doc_id.trim().is_empty() {
                    return fail(ErrorCode::InvalidParameter, "doc_id must not be empty");
                }
            }
            AnalysisRequest::Bootstrap(p) => {
                p.measure = canonical_measure(&p.measure)?;
                if !(p.confidence > 0.0 && p.confidence < 1.0) {
                    return fail(ErrorCode::InvalidParameter, "confidence outside (0, 1)");
                }
            }
        }
        Ok(req)
    }
}

/// One row of a baseline comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub baseline: String,
    pub comparison: String,
    pub measure: MeasureSpec,
    pub baseline_mean: f64,
    pub comparison_mean: f64,
    pub test: TestResult,
    /// Absent when the differences have zero variance.
    pub effect_size: Option<f64>,
    pub adjusted_p: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub baseline: String,
    pub test: TestKind,
    pub correction: CorrectionMethod,
    pub alpha: f64,
    pub rows: Vec<ComparisonRow>,
    pub matrix: EvalMatrix,
}

/// Tests every non-baseline run against the baseline. p-values are corrected
/// per measure across the comparisons.
pub fn compare_runs(
    matrix: &EvalMatrix,
    baseline: &str,
    test: TestKind,
    correction: CorrectionMethod,
    alpha: f64,
) -> Result<Comparison> {
    check_alpha(alpha)?;
    if matrix.run_index(baseline).is_none() {
        return fail(ErrorCode::UnknownRun, format!("baseline run '{baseline}' not found"));
    }
    if matrix.run_ids.len() < 2 {
        return fail(ErrorCode::InsufficientData, "comparison needs at least 2 runs");
    }
    let mut rows = Vec::new();
    for measure in matrix.measures() {
        let mut block = Vec::new();
        for other in matrix.run_ids.iter().filter(|r| r.as_str() != baseline) {
            let sample = PairedSample::from_matrix(matrix, baseline, other, measure)?;
            let result = run_test(test, &sample)?;
            block.push(ComparisonRow {
                baseline: baseline.to_owned(),
                comparison: other.clone(),
                measure: *measure,
                baseline_mean: matrix.mean(baseline, measure).unwrap_or(0.0),
                comparison_mean: matrix.mean(other, measure).unwrap_or(0.0),
                test: result,
                effect_size: paired_effect_size(&sample).ok(),
                adjusted_p: result.p_value,
                significant: false,
            });
        }
        let raw: Vec<f64> = block.iter().map(|r| r.test.p_value).collect();
        let corrected = correct(correction, &raw, alpha)?;
        for (row, (adj, rej)) in block.iter_mut().zip(corrected.adjusted_p.iter().zip(&corrected.reject)) {
            row.adjusted_p = *adj;
            row.significant = *rej;
        }
        rows.extend(block);
    }
    Ok(Comparison {
        baseline: baseline.to_owned(),
        test,
        correction,
        alpha,
        rows,
        matrix: matrix.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionOutput {
    pub projection: Projection,
    pub neighbours: std::collections::BTreeMap<String, Vec<Neighbour>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapRow {
    pub run_id: String,
    pub measure: MeasureSpec,
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapOutput {
    pub confidence: f64,
    pub iterations: usize,
    pub seed: u64,
    pub rows: Vec<BootstrapRow>,
}

/// Typed product of one analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "data", rename_all = "snake_case")]
pub enum AnalysisOutput {
    Evaluate(EvalMatrix),
    Compare(Comparison),
    PrCurve(Vec<PRCurves>),
    QueryDelta(QueryDeltaReport),
    QueryLength(LengthAnalysis),
    WordCloud(TokenFrequencies),
    Projection(ProjectionOutput),
    QrelsDistribution(QrelsDistribution),
    SharedDocuments(Vec<SharedDocument>),
    DocTrace(DocRankTrace),
    Bootstrap(BootstrapOutput),
}

/// Borrowed view of the stores an analysis may read.
#[derive(Debug, Clone, Copy, Default)]
pub struct Inputs<'a> {
    pub queries: Option<&'a QuerySet>,
    pub qrels: Option<&'a QrelsStore>,
    pub runs: &'a [RunStore],
    pub embeddings: Option<&'a QueryVectors>,
}

impl<'a> Inputs<'a> {
    /// Input kinds the request needs but this view lacks.
    pub fn missing(&self, request: &AnalysisRequest) -> Vec<InputKind> {
        request
            .inputs()
            .into_iter()
            .filter(|k| match k {
                InputKind::Queries => self.queries.is_none(),
                InputKind::Qrels => self.qrels.is_none(),
                InputKind::Run => self.runs.is_empty(),
                InputKind::Embeddings => self.embeddings.is_none(),
            })
            .collect()
    }

    fn qrels(&self) -> Result<&'a QrelsStore> {
        self.qrels.ok_or_else(|| missing_inputs(&[InputKind::Qrels]))
    }

    fn queries(&self) -> Result<&'a QuerySet> {
        self.queries.ok_or_else(|| missing_inputs(&[InputKind::Queries]))
    }

    fn run_id_or_first(&self, id: &Option<String>) -> Result<String> {
        match id {
            Some(id) if self.runs.iter().any(|r| &r.run_id == id) => Ok(id.clone()),
            Some(id) => fail(ErrorCode::UnknownRun, format!("run '{id}' not found")),
            None => self
                .runs
                .first()
                .map(|r| r.run_id.clone())
                .ok_or_else(|| missing_inputs(&[InputKind::Run])),
        }
    }

    fn evaluate(&self, measures: &[MeasureSpec], policy: MissingQueryPolicy) -> Result<EvalMatrix> {
        evaluate(self.runs, self.qrels()?, measures, policy)
    }
}

pub fn missing_inputs(kinds: &[InputKind]) -> Error {
    let names: Vec<&str> = kinds.iter().map(|k| k.as_str()).collect();
    Error::new(ErrorCode::MissingInputs, format!("missing inputs: {}", names.join(", ")))
        .with_details(serde_json::json!({ "missing": names }))
}

/// Runs one analysis.
pub fn execute(request: &AnalysisRequest, inputs: &Inputs<'_>) -> Result<AnalysisOutput> {
    let missing = inputs.missing(request);
    if !missing.is_empty() {
        return Err(missing_inputs(&missing));
    }
    let request = request.canonicalize()?;
    Ok(match &request {
        AnalysisRequest::Evaluate(p) => {
            let specs = parse_measure_list(&p.measures.join(","))?;
            AnalysisOutput::Evaluate(inputs.evaluate(&specs, p.policy)?)
        }
        AnalysisRequest::Compare(p) => {
            let specs = parse_measure_list(&p.measures.join(","))?;
            let baseline = inputs.run_id_or_first(&p.baseline)?;
            let matrix = inputs.evaluate(&specs, p.policy)?;
            AnalysisOutput::Compare(compare_runs(&matrix, &baseline, p.test, p.correction, p.alpha)?)
        }
        AnalysisRequest::PrCurve(p) => {
            let qrels = inputs.qrels()?;
            let mut curves = Vec::new();
            for run in inputs.runs {
                if p.run_ids.is_empty() || p.run_ids.contains(&run.run_id) {
                    curves.push(analysis::interpolated_pr_curve(run, qrels, p.rel_threshold)?);
                }
            }
            if let Some(unknown) = p.run_ids.iter().find(|id| !inputs.runs.iter().any(|r| &r.run_id == *id)) {
                return fail(ErrorCode::UnknownRun, format!("run '{unknown}' not found"));
            }
            AnalysisOutput::PrCurve(curves)
        }
        AnalysisRequest::QueryDelta(p) => {
            let measure = parse_measure_spec(&p.measure)?;
            let baseline = inputs.run_id_or_first(&p.baseline)?;
            let comparison = match &p.comparison {
                Some(_) => inputs.run_id_or_first(&p.comparison)?,
                None => inputs
                    .runs
                    .iter()
                    .map(|r| r.run_id.clone())
                    .find(|r| *r != baseline)
                    .unwrap_or_else(|| baseline.clone()),
            };
            let matrix = inputs.evaluate(&[measure], p.policy)?;
            AnalysisOutput::QueryDelta(analysis::per_query_delta(&matrix, &baseline, &comparison, &measure, p.tie_band)?)
        }
        AnalysisRequest::QueryLength(p) => {
            let measure = parse_measure_spec(&p.measure)?;
            let run_id = inputs.run_id_or_first(&p.run_id)?;
            let matrix = inputs.evaluate(&[measure], p.policy)?;
            AnalysisOutput::QueryLength(analysis::query_length_analysis(
                inputs.queries()?,
                &matrix,
                &run_id,
                &measure,
                p.n_buckets,
            )?)
        }
        AnalysisRequest::WordCloud(p) => {
            let stop = match &p.stopwords {
                Stopwords::English => default_stopwords(),
                Stopwords::None => Default::default(),
                Stopwords::Custom(words) => words.iter().cloned().collect(),
            };
            AnalysisOutput::WordCloud(token_frequencies(inputs.queries()?, &stop, p.min_token_len)?)
        }
        AnalysisRequest::Projection(p) => {
            let tfidf;
            let vectors = match (&p.embeddings, inputs.embeddings) {
                (Some(_), Some(v)) => v,
                (Some(_), None) => return Err(missing_inputs(&[InputKind::Embeddings])),
                (None, _) => {
                    tfidf = tfidf_vectors(inputs.queries()?)?;
                    &tfidf
                }
            };
            AnalysisOutput::Projection(ProjectionOutput {
                projection: pca_project(vectors, p.dims)?,
                neighbours: nearest_queries(vectors, p.neighbours),
            })
        }
        AnalysisRequest::QrelsDistribution(p) => {
            AnalysisOutput::QrelsDistribution(analysis::qrels_distribution(inputs.qrels()?, p.rel_threshold))
        }
        AnalysisRequest::SharedDocuments(p) => AnalysisOutput::SharedDocuments(analysis::multi_query_documents(
            inputs.qrels()?,
            p.min_queries,
            p.rel_threshold,
        )?),
        AnalysisRequest::DocTrace(p) => {
            AnalysisOutput::DocTrace(analysis::document_rank_trace(p.doc_id.trim(), inputs.runs, inputs.qrels()?)?)
        }
        AnalysisRequest::Bootstrap(p) => {
            let measure = parse_measure_spec(&p.measure)?;
            let matrix = inputs.evaluate(&[measure], p.policy)?;
            let mut rows = Vec::new();
            for run_id in &matrix.run_ids {
                let (_, scores) = matrix.run_scores(run_id, &measure)?;
                let (lower, upper) = bootstrap_ci(scores, p.confidence, p.iterations, p.seed)?;
                rows.push(BootstrapRow {
                    run_id: run_id.clone(),
                    measure,
                    mean: matrix.mean(run_id, &measure).unwrap_or(0.0),
                    lower,
                    upper,
                });
            }
            AnalysisOutput::Bootstrap(BootstrapOutput {
                confidence: p.confidence,
                iterations: p.iterations,
                seed: p.seed,
                rows,
            })
        }
    })
}

/// The analyses behind a full report, given which inputs are present.
pub fn default_suite(inputs: &Inputs<'_>) -> Vec<AnalysisRequest> {
    let mut suite = Vec::new();
    let have_qrels = inputs.qrels.is_some();
    let have_runs = !inputs.runs.is_empty();
    if have_qrels && have_runs {
        suite.push(AnalysisRequest::Evaluate(EvaluateParams {
            measures: default_measures(),
            policy: MissingQueryPolicy::ZeroFill,
        }));
        if inputs.runs.len() >= 2 {
            suite.push(AnalysisRequest::Compare(CompareParams {
                measures: default_measures(),
                baseline: None,
                test: TestKind::TTest,
                correction: CorrectionMethod::Holm,
                alpha: DEFAULT_ALPHA,
                policy: MissingQueryPolicy::ZeroFill,
            }));
        }
        suite.push(AnalysisRequest::PrCurve(PrCurveParams {
            run_ids: vec![],
            rel_threshold: DEFAULT_REL_THRESHOLD,
        }));
        suite.push(AnalysisRequest::Bootstrap(BootstrapParams {
            measure: default_measure(),
            confidence: default_confidence(),
            iterations: default_iterations(),
            seed: DEFAULT_SEED,
            policy: MissingQueryPolicy::ZeroFill,
        }));
        suite.push(AnalysisRequest::QueryDelta(QueryDeltaParams {
            baseline: None,
            comparison: None,
            measure: default_measure(),
            tie_band: default_tie_band(),
            policy: MissingQueryPolicy::ZeroFill,
        }));
    }
    if inputs.queries.is_some() {
        if have_qrels && have_runs {
            suite.push(AnalysisRequest::QueryLength(QueryLengthParams {
                run_id: None,
                measure: default_measure(),
                n_buckets: 2,
                policy: MissingQueryPolicy::ZeroFill,
            }));
        }
        suite.push(AnalysisRequest::WordCloud(WordCloudParams {
            stopwords: Stopwords::English,
            min_token_len: default_min_token_len(),
        }));
        suite.push(AnalysisRequest::Projection(ProjectionParams {
            embeddings: None,
            dims: default_dims(),
            neighbours: default_neighbours(),
        }));
    }
    if let Some(qrels) = inputs.qrels {
        suite.push(AnalysisRequest::QrelsDistribution(ThresholdParams {
            rel_threshold: DEFAULT_REL_THRESHOLD,
        }));
        suite.push(AnalysisRequest::SharedDocuments(SharedDocumentsParams {
            min_queries: default_min_queries(),
            rel_threshold: DEFAULT_REL_THRESHOLD,
        }));
        let seed_doc = analysis::multi_query_documents(qrels, 2, DEFAULT_REL_THRESHOLD)
            .ok()
            .and_then(|docs| docs.into_iter().next())
            .map(|d| d.doc_id)
            .or_else(|| {
                qrels
                    .judgments
                    .values()
                    .flat_map(|m| m.iter())
                    .find(|(_, &g)| g >= DEFAULT_REL_THRESHOLD)
                    .map(|(d, _)| d.clone())
            });
        if let (Some(doc_id), true) = (seed_doc, have_runs) {
            suite.push(AnalysisRequest::DocTrace(DocTraceParams { doc_id }));
        }
    }
    suite
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> (QrelsStore, Vec<RunStore>) {
        let qrels = QrelsStore::from_triples([
            ("q1", "a", 2),
            ("q1", "b", 0),
            ("q1", "c", 1),
            ("q2", "d", 1),
            ("q2", "e", 1),
            ("q3", "a", 1),
        ]);
        let r1 = RunStore::from_triples("base", [("q1", "b", 3.0), ("q1", "a", 2.0), ("q2", "d", 1.0), ("q3", "z", 1.0)]);
        let r2 = RunStore::from_triples("new", [("q1", "a", 3.0), ("q2", "e", 2.0), ("q2", "d", 1.0), ("q3", "a", 1.0)]);
        let r3 = RunStore::from_triples("other", [("q1", "c", 3.0), ("q2", "x", 2.0), ("q3", "a", 1.0)]);
        (qrels, vec![r1, r2, r3])
    }

    #[test]
    fn request_json_defaults() {
        let r = AnalysisRequest::from_json(serde_json::json!({"kind": "evaluate"})).unwrap();
        assert_eq!(
            r,
            AnalysisRequest::Evaluate(EvaluateParams {
                measures: default_measures(),
                policy: MissingQueryPolicy::ZeroFill
            })
        );
        let err = AnalysisRequest::from_json(serde_json::json!({"kind": "nope"})).unwrap_err();
        assert_eq!(err.code, ErrorCode::InvalidParameter);
    }

    #[test]
    fn canonical_form_merges_synonyms() {
        let a = AnalysisRequest::from_json(serde_json::json!({"kind": "evaluate", "params": {"measures": ["map", "ndcg@10"]}}))
            .unwrap()
            .canonicalize()
            .unwrap();
        let b = AnalysisRequest::from_json(serde_json::json!({"kind": "evaluate", "params": {"measures": ["AP", "nDCG@10"]}}))
            .unwrap()
            .canonicalize()
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn missing_inputs_are_listed() {
        let inputs = Inputs::default();
        let err = execute(&AnalysisRequest::from_json(serde_json::json!({"kind": "evaluate"})).unwrap(), &inputs).unwrap_err();
        assert_eq!(err.code, ErrorCode::MissingInputs);
        assert_eq!(err.details["missing"], serde_json::json!(["qrels", "run"]));
    }

    #[test]
    fn comparison_applies_holm_per_measure() {
        let (qrels, runs) = fixture();
        let matrix = evaluate(&runs, &qrels, &[parse_measure_spec("AP").unwrap()], MissingQueryPolicy::ZeroFill).unwrap();
        let c = compare_runs(&matrix, "base", TestKind::TTest, CorrectionMethod::Holm, 0.05).unwrap();
        assert_eq!(c.rows.len(), 2);
        let raw: Vec<f64> = c.rows.iter().map(|r| r.test.p_value).collect();
        let expected = crate::stats::holm_correction(&raw, 0.05).unwrap();
        assert_eq!(c.rows.iter().map(|r| r.adjusted_p).collect::<Vec<_>>(), expected.adjusted_p);
        assert_eq!(
            compare_runs(&matrix, "typo", TestKind::TTest, CorrectionMethod::Holm, 0.05).unwrap_err().code,
            ErrorCode::UnknownRun
        );
    }

    #[test]
    fn suite_runs_end_to_end() {
        let (qrels, runs) = fixture();
        let queries = QuerySet {
            records: ["heart attack", "lung cancer treatment", "heart failure in elderly patients"]
                .iter()
                .enumerate()
                .map(|(i, t)| crate::trec_io::QueryRecord {
                    qid: format!("q{}", i + 1),
                    text: t.to_string(),
                })
                .collect(),
        };
        let inputs = Inputs {
            queries: Some(&queries),
            qrels: Some(&qrels),
            runs: &runs,
            embeddings: None,
        };
        let suite = default_suite(&inputs);
        assert!(suite.len() >= 10);
        for req in &suite {
            execute(req, &inputs).unwrap_or_else(|e| panic!("{} failed: {e}", req.kind()));
        }
    }
}
