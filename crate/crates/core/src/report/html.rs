use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::csv::method_name;
use super::json::canonical_json;
use crate::engine::{AnalysisOutput, AnalysisRequest};
use crate::error::{fail, Error, ErrorCode, Result};
use crate::session::{AnalysisSession, InputDigest, StoredResult};

/// Report sections, in page order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Section {
    Performance,
    Query,
    Text,
    Collection,
}

impl Section {
    pub const ALL: [Section; 4] = [Section::Performance, Section::Query, Section::Text, Section::Collection];

    pub fn id(self) -> &'static str {
        match self {
            Section::Performance => "performance",
            Section::Query => "query",
            Section::Text => "text",
            Section::Collection => "collection",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Section::Performance => "Experiment Performance Report",
            Section::Query => "Query-based Report",
            Section::Text => "Query Text-based Report",
            Section::Collection => "Query Collection-based Report",
        }
    }

    /// The section an analysis kind belongs to.
    pub fn of(request: &AnalysisRequest) -> Section {
        match request {
            AnalysisRequest::Evaluate(_)
            | AnalysisRequest::Compare(_)
            | AnalysisRequest::PrCurve(_)
            | AnalysisRequest::Bootstrap(_) => Section::Performance,
            AnalysisRequest::QueryDelta(_) => Section::Query,
            AnalysisRequest::QueryLength(_) | AnalysisRequest::WordCloud(_) | AnalysisRequest::Projection(_) => {
                Section::Text
            }
            AnalysisRequest::QrelsDistribution(_)
            | AnalysisRequest::SharedDocuments(_)
            | AnalysisRequest::DocTrace(_) => Section::Collection,
        }
    }
}

impl std::str::FromStr for Section {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Section::ALL
            .into_iter()
            .find(|sec| sec.id() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| {
                Error::new(
                    ErrorCode::InvalidParameter,
                    format!("unknown section '{s}'; expected performance, query, text or collection"),
                )
            })
    }
}

/// Parses a comma-separated section list. Duplicates are dropped and the
/// result follows page order.
pub fn parse_sections(text: &str) -> Result<Vec<Section>> {
    let mut out: Vec<Section> = text
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect::<Result<_>>()?;
    out.sort();
    out.dedup();
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub reference: String,
    pub section: Section,
    pub request: AnalysisRequest,
}

/// What a report was built from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportManifest {
    pub session_id: String,
    pub generated_at: String,
    pub digest_algorithm: String,
    pub inputs: Vec<InputDigest>,
    pub sections: Vec<Section>,
    pub parameters: Vec<ManifestEntry>,
}

fn esc(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

/// The serialized name of a unit enum value.
pub(crate) fn label<T: Serialize>(value: &T) -> String {
    match serde_json::to_value(value) {
        Ok(serde_json::Value::String(s)) => s,
        _ => String::new(),
    }
}

fn num(x: f64) -> String {
    format!("{x:.6}")
}

/// JSON safe to place inside a `<script>` element.
fn script_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    Ok(canonical_json(value)?.replace('<', "\\u003c").replace('>', "\\u003e").replace('&', "\\u0026"))
}

struct Table {
    head: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new<S: Into<String>>(head: impl IntoIterator<Item = S>) -> Self {
        Table {
            head: head.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    fn row(&mut self, cells: Vec<String>) {
        self.rows.push(cells);
    }

    fn render(&self, out: &mut String) {
        out.push_str("<table><thead><tr>");
        for h in &self.head {
            let _ = write!(out, "<th>{}</th>", esc(h));
        }
        out.push_str("</tr></thead><tbody>");
        for row in &self.rows {
            out.push_str("<tr>");
            for cell in row {
                let _ = write!(out, "<td>{}</td>", esc(cell));
            }
            out.push_str("</tr>");
        }
        out.push_str("</tbody></table>\n");
    }
}

const CHART_W: f64 = 480.0;
const CHART_H: f64 = 300.0;
const PAD: f64 = 40.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

fn svg_open(out: &mut String, label: &str) {
    let _ = write!(
        out,
        "<svg class=\"chart\" viewBox=\"0 0 {CHART_W} {CHART_H}\" width=\"{CHART_W}\" height=\"{CHART_H}\" role=\"img\" aria-label=\"{}\">",
        esc(label)
    );
    let _ = write!(
        out,
        "<rect x=\"{PAD}\" y=\"{PAD}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#999\"/>",
        CHART_W - 2.0 * PAD,
        CHART_H - 2.0 * PAD
    );
}

fn sx(t: f64) -> f64 {
    PAD + t * (CHART_W - 2.0 * PAD)
}

fn sy(t: f64) -> f64 {
    CHART_H - PAD - t * (CHART_H - 2.0 * PAD)
}

fn unit(x: f64, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        (x - lo) / (hi - lo)
    } else {
        0.5
    }
}

fn render_output(out: &mut String, output: &AnalysisOutput) {
    match output {
        AnalysisOutput::Evaluate(m) => {
            out.push_str("<h4>Mean effectiveness</h4>");
            let mut t = Table::new(std::iter::once("run".to_owned()).chain(m.measures().map(|s| s.to_string())));
            for run in &m.run_ids {
                let mut row = vec![run.clone()];
                row.extend(m.measures().map(|s| m.mean(run, s).map_or_else(String::new, num)));
                t.row(row);
            }
            t.render(out);
            let excluded: Vec<String> = m
                .columns
                .iter()
                .filter(|c| !c.excluded_qids.is_empty())
                .map(|c| format!("{}: {}", c.measure, c.excluded_qids.join(" ")))
                .collect();
            if !excluded.is_empty() {
                let _ = write!(
                    out,
                    "<p class=\"notice\">Queries without relevant documents were excluded ({}).</p>",
                    esc(&excluded.join("; "))
                );
            }
        }
        AnalysisOutput::Compare(c) => {
            let _ = write!(
                out,
                "<h4>Significance against {}</h4><p>{} test, {} correction, alpha {}.</p>",
                esc(&c.baseline),
                label(&c.test),
                label(&c.correction),
                num(c.alpha)
            );
            let mut t = Table::new([
                "comparison",
                "measure",
                "baseline mean",
                "comparison mean",
                "test",
                "statistic",
                "p",
                "adjusted p",
                "effect size",
                "significant",
            ]);
            for r in &c.rows {
                t.row(vec![
                    r.comparison.clone(),
                    r.measure.to_string(),
                    num(r.baseline_mean),
                    num(r.comparison_mean),
                    method_name(r).to_owned(),
                    num(r.test.statistic),
                    num(r.test.p_value),
                    num(r.adjusted_p),
                    r.effect_size.map_or_else(|| "n/a".to_owned(), num),
                    r.significant.to_string(),
                ]);
            }
            t.render(out);
        }
        AnalysisOutput::PrCurve(curves) => {
            out.push_str("<h4>Interpolated precision-recall</h4>");
            svg_open(out, "interpolated precision-recall curves");
            for (i, c) in curves.iter().enumerate() {
                let pts: Vec<String> = c
                    .averaged
                    .recall_levels
                    .iter()
                    .zip(&c.averaged.precision)
                    .map(|(r, p)| format!("{:.2},{:.2}", sx(*r), sy(*p)))
                    .collect();
                let _ = write!(
                    out,
                    "<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"2\" points=\"{}\"><title>{}</title></polyline>",
                    PALETTE[i % PALETTE.len()],
                    pts.join(" "),
                    esc(&c.run_id)
                );
            }
            out.push_str("</svg>\n");
            let levels = curves.first().map(|c| c.averaged.recall_levels.clone()).unwrap_or_default();
            let mut t = Table::new(std::iter::once("run".to_owned()).chain(levels.iter().map(|l| format!("R={l:.1}"))));
            for c in curves {
                let mut row = vec![c.run_id.clone()];
                row.extend(c.averaged.precision.iter().map(|p| num(*p)));
                t.row(row);
            }
            t.render(out);
        }
        AnalysisOutput::Bootstrap(b) => {
            let _ = write!(
                out,
                "<h4>Bootstrap confidence intervals</h4><p>{} resamples, confidence {}, seed {}.</p>",
                b.iterations,
                num(b.confidence),
                b.seed
            );
            let mut t = Table::new(["run", "measure", "mean", "lower", "upper"]);
            for r in &b.rows {
                t.row(vec![r.run_id.clone(), r.measure.to_string(), num(r.mean), num(r.lower), num(r.upper)]);
            }
            t.render(out);
        }
        AnalysisOutput::QueryDelta(d) => {
            let _ = write!(
                out,
                "<h4>Per-query {} difference: {} vs {}</h4><p>wins {}, ties {}, losses {} (tie band {}).</p>",
                esc(&d.measure.to_string()),
                esc(&d.comparison_run_id),
                esc(&d.baseline_run_id),
                d.wins,
                d.ties,
                d.losses,
                d.tie_band
            );
            svg_open(out, "per-query differences");
            let n = d.deltas.len().max(1) as f64;
            let bar_w = (CHART_W - 2.0 * PAD) / n;
            let zero = sy(0.5);
            for (i, q) in d.deltas.iter().enumerate() {
                let h = q.delta.clamp(-1.0, 1.0) * (CHART_H - 2.0 * PAD) / 2.0;
                let (y, hh) = if h >= 0.0 { (zero - h, h) } else { (zero, -h) };
                let fill = if q.delta >= 0.0 { "#2ca02c" } else { "#d62728" };
                let _ = write!(
                    out,
                    "<rect x=\"{:.2}\" y=\"{y:.2}\" width=\"{:.2}\" height=\"{hh:.2}\" fill=\"{fill}\"><title>{} {}</title></rect>",
                    PAD + i as f64 * bar_w,
                    bar_w.max(0.5),
                    esc(&q.qid),
                    num(q.delta)
                );
            }
            out.push_str("</svg>\n");
            let mut t = Table::new(["qid", "baseline", "comparison", "delta"]);
            for q in &d.deltas {
                t.row(vec![q.qid.clone(), num(q.baseline), num(q.comparison), num(q.delta)]);
            }
            t.render(out);
        }
        AnalysisOutput::QueryLength(l) => {
            let _ = write!(
                out,
                "<h4>Query length vs {} for {}</h4>",
                esc(&l.measure.to_string()),
                esc(&l.run_id)
            );
            let mut t = Table::new(["correlation", "coefficient", "p", "n"]);
            for c in [&l.pearson, &l.spearman].into_iter().flatten() {
                t.row(vec![label(&c.method), num(c.coefficient), num(c.p_value), c.n.to_string()]);
            }
            t.render(out);
            if let Some(e) = &l.correlation_error {
                let _ = write!(out, "<p class=\"notice\">Correlation unavailable: {}</p>", esc(&e.message));
            }
            let mut t = Table::new(["tokens", "queries", "mean score"]);
            for b in &l.buckets {
                let range = match b.lower {
                    Some(lo) if lo != b.upper => format!("{lo}-{}", b.upper),
                    Some(lo) => lo.to_string(),
                    None => format!("<= {}", b.upper),
                };
                t.row(vec![range, b.qids.len().to_string(), b.mean_score.map_or_else(String::new, num)]);
            }
            t.render(out);
        }
        AnalysisOutput::WordCloud(f) => {
            out.push_str("<h4>Query terms</h4><p class=\"cloud\">");
            let max = f.entries.first().map_or(1, |e| e.count).max(1) as f64;
            for e in f.entries.iter().take(100) {
                let size = 0.8 + 1.6 * e.count as f64 / max;
                let _ = write!(
                    out,
                    "<span style=\"font-size:{size:.2}em\" title=\"{}\">{}</span> ",
                    e.count,
                    esc(&e.token)
                );
            }
            out.push_str("</p>\n");
            let mut t = Table::new(["token", "count"]);
            for e in f.entries.iter().take(25) {
                t.row(vec![e.token.clone(), e.count.to_string()]);
            }
            t.render(out);
        }
        AnalysisOutput::Projection(p) => {
            let pr = &p.projection;
            let ratios: Vec<String> = pr.explained_variance_ratio.iter().map(|r| num(*r)).collect();
            let _ = write!(
                out,
                "<h4>Query similarity map ({} vectors)</h4><p>Explained variance ratio: {}.</p>",
                label(&pr.source),
                ratios.join(", ")
            );
            svg_open(out, "query projection");
            let (xs, ys): (Vec<f64>, Vec<f64>) = pr.coordinates.iter().map(|c| (c[0], c[1])).unzip();
            let (x0, x1) = xs.iter().fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
            let (y0, y1) = ys.iter().fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
            for (i, qid) in pr.qids.iter().enumerate() {
                let (cx, cy) = (sx(unit(xs[i], x0, x1)), sy(unit(ys[i], y0, y1)));
                let _ = write!(
                    out,
                    "<circle cx=\"{cx:.2}\" cy=\"{cy:.2}\" r=\"4\" fill=\"#1f77b4\"><title>{}</title></circle>",
                    esc(qid)
                );
            }
            out.push_str("</svg>\n");
            let mut t = Table::new(["qid", "nearest", "similarity"]);
            for (qid, list) in &p.neighbours {
                if let Some(nb) = list.first() {
                    t.row(vec![qid.clone(), nb.qid.clone(), num(nb.similarity)]);
                }
            }
            t.render(out);
        }
        AnalysisOutput::QrelsDistribution(d) => {
            let _ = write!(
                out,
                "<h4>Relevance judgments</h4><p>{} judgments, {} relevant at grade {} or above.</p>",
                d.total_judgments, d.total_relevant, d.rel_threshold
            );
            let mut t = Table::new(["grade", "judgments"]);
            for (g, n) in &d.grade_histogram {
                t.row(vec![g.to_string(), n.to_string()]);
            }
            t.render(out);
            let mut t = Table::new(["qid", "judged", "relevant"]);
            for (q, c) in &d.per_query {
                t.row(vec![q.clone(), c.judged.to_string(), c.relevant.to_string()]);
            }
            t.render(out);
        }
        AnalysisOutput::SharedDocuments(docs) => {
            let _ = write!(out, "<h4>Documents relevant to several queries</h4><p>{} documents.</p>", docs.len());
            let mut t = Table::new(["doc_id", "queries", "qids"]);
            for d in docs.iter().take(50) {
                t.row(vec![d.doc_id.clone(), d.qids.len().to_string(), d.qids.join(" ")]);
            }
            t.render(out);
        }
        AnalysisOutput::DocTrace(tr) => {
            let _ = write!(out, "<h4>Rank trace for document {}</h4>", esc(&tr.doc_id));
            let qids: std::collections::BTreeSet<&String> = tr
                .ranks
                .values()
                .flat_map(|m| m.keys())
                .chain(tr.judged_grades.keys())
                .collect();
            let mut t = Table::new(std::iter::once("run".to_owned()).chain(qids.iter().map(|q| q.to_string())));
            let mut grades = vec!["(grade)".to_owned()];
            grades.extend(qids.iter().map(|q| tr.judged_grades.get(*q).map_or_else(|| "-".into(), i64::to_string)));
            t.row(grades);
            for (run, ranks) in &tr.ranks {
                let mut row = vec![run.clone()];
                row.extend(
                    qids.iter()
                        .map(|q| ranks.get(*q).copied().flatten().map_or_else(|| "-".into(), |r| r.to_string())),
                );
                t.row(row);
            }
            t.render(out);
        }
    }
}

const STYLE: &str = "body{font-family:system-ui,sans-serif;max-width:1100px;margin:2em auto;padding:0 1em;color:#222}\
table{border-collapse:collapse;margin:.5em 0 1.5em}th,td{border:1px solid #ccc;padding:2px 8px;text-align:right}\
th:first-child,td:first-child{text-align:left}h2{border-bottom:2px solid #444;margin-top:2em}\
.notice{color:#8a5a00}.cloud span{margin-right:.4em}code{font-size:.85em;word-break:break-all}\
@media print{section{page-break-inside:avoid}}";

fn render_result(out: &mut String, result: &StoredResult) -> Result<()> {
    let output = result.output.as_ref().expect("current results are done");
    let _ = write!(
        out,
        "<div class=\"result\" id=\"result-{}\" data-kind=\"{}\">",
        esc(&result.reference),
        result.request.kind()
    );
    render_output(out, output);
    let _ = writeln!(
        out,
        "<script type=\"application/json\" class=\"chart-data\">{}</script></div>",
        script_json(output)?
    );
    Ok(())
}

/// Self-contained HTML summary of a session's current results.
///
/// Output depends only on the session state, the section list and
/// `generated_at`, so a pinned timestamp gives identical bytes.
pub fn render_html_report(session: &AnalysisSession, sections: &[Section], generated_at: &str) -> Result<Vec<u8>> {
    let results = session.current_results();
    if results.is_empty() {
        return fail(ErrorCode::NoResults, "the session has no computed results");
    }
    let mut sections = sections.to_vec();
    sections.sort();
    sections.dedup();

    let included: Vec<&StoredResult> = results
        .iter()
        .copied()
        .filter(|r| sections.contains(&Section::of(&r.request)))
        .collect();
    let manifest = ReportManifest {
        session_id: session.session_id.clone(),
        generated_at: generated_at.to_owned(),
        digest_algorithm: "sha256".into(),
        inputs: session.input_digests(),
        sections: sections.clone(),
        parameters: included
            .iter()
            .map(|r| ManifestEntry {
                reference: r.reference.clone(),
                section: Section::of(&r.request),
                request: r.request.clone(),
            })
            .collect(),
    };

    let mut out = String::new();
    out.push_str("<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n");
    let _ = writeln!(out, "<title>Evaluation report {}</title>", esc(&session.session_id));
    let _ = writeln!(out, "<style>{STYLE}</style>\n</head>\n<body>");
    let _ = writeln!(
        out,
        "<h1>Evaluation report</h1>\n<p>Session <code>{}</code>, generated {}.</p>",
        esc(&session.session_id),
        esc(generated_at)
    );

    out.push_str("<section id=\"manifest\"><h2>Inputs and parameters</h2>\n");
    let mut t = Table::new(["kind", "name", "sha256"]);
    for d in &manifest.inputs {
        t.row(vec![d.kind.as_str().to_owned(), d.name.clone(), d.digest.clone()]);
    }
    t.render(&mut out);
    let mut t = Table::new(["analysis", "reference", "parameters"]);
    for e in &manifest.parameters {
        let params = serde_json::to_value(&e.request).ok().and_then(|v| v.get("params").cloned()).unwrap_or_default();
        t.row(vec![e.request.kind().to_owned(), e.reference[..12].to_owned(), canonical_json(&params)?]);
    }
    t.render(&mut out);
    let _ = writeln!(
        out,
        "<script type=\"application/json\" id=\"report-manifest\">{}</script>\n</section>",
        script_json(&manifest)?
    );

    for section in &sections {
        let members: Vec<&&StoredResult> = included.iter().filter(|r| Section::of(&r.request) == *section).collect();
        if members.is_empty() {
            let _ = writeln!(
                out,
                "<p class=\"notice\" data-section=\"{}\">Section omitted: no {} results were computed.</p>",
                section.id(),
                section.id()
            );
            continue;
        }
        let _ = writeln!(out, "<section id=\"{}\"><h2>{}</h2>", section.id(), section.title());
        for r in members {
            render_result(&mut out, r)?;
        }
        out.push_str("</section>\n");
    }
    out.push_str("</body>\n</html>\n");
    Ok(out.into_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::InputKind;

    const NOW: &str = "2026-01-01T00:00:00Z";

    fn session(full: bool) -> AnalysisSession {
        let mut s = AnalysisSession::new("report-test", NOW);
        s.ingest(InputKind::Queries, "q.tsv", b"q1\theart attack <b>\nq2\tlung cancer\nq3\theart failure\n", NOW)
            .unwrap();
        s.ingest(InputKind::Qrels, "qrels", b"q1 0 a 2\nq1 0 b 0\nq2 0 c 1\nq3 0 a 1\n", NOW).unwrap();
        s.ingest(InputKind::Run, "r1", b"q1 Q0 a 1 2 A\nq2 Q0 c 1 2 A\nq3 Q0 b 1 2 A\n", NOW).unwrap();
        s.ingest(InputKind::Run, "r2", b"q1 Q0 b 1 2 B\nq2 Q0 c 1 2 B\nq3 Q0 a 1 2 B\n", NOW).unwrap();
        if full {
            s.run_default_suite(NOW).unwrap();
        } else {
            let req = AnalysisRequest::from_json(serde_json::json!({"kind": "evaluate"})).unwrap();
            s.run_inline(&req, NOW).unwrap();
        }
        s
    }

    #[test]
    fn full_report_has_every_heading_and_no_remote_refs() {
        let s = session(true);
        let html = String::from_utf8(render_html_report(&s, &Section::ALL, NOW).unwrap()).unwrap();
        for sec in Section::ALL {
            assert!(html.contains(&format!("<h2>{}</h2>", sec.title())), "{}", sec.title());
        }
        assert!(!html.contains("http://") && !html.contains("https://"));
        assert!(!html.contains("<b>"));
        assert_eq!(html.as_bytes(), render_html_report(&s, &Section::ALL, NOW).unwrap().as_slice());
    }

    #[test]
    fn eval_only_session_omits_other_sections() {
        let s = session(false);
        let html = String::from_utf8(render_html_report(&s, &Section::ALL, NOW).unwrap()).unwrap();
        assert!(html.contains("<h2>Experiment Performance Report</h2>"));
        assert!(!html.contains("<h2>Query-based Report</h2>"));
        assert_eq!(html.matches("Section omitted").count(), 3);
    }

    #[test]
    fn empty_selection_is_manifest_only() {
        let s = session(false);
        let html = String::from_utf8(render_html_report(&s, &[], NOW).unwrap()).unwrap();
        assert!(html.contains("report-manifest"));
        assert!(!html.contains("<h2>Experiment Performance Report</h2>"));
        assert!(!html.contains("Section omitted"));
    }

    #[test]
    fn no_results() {
        let s = AnalysisSession::new("x", NOW);
        assert_eq!(render_html_report(&s, &Section::ALL, NOW).unwrap_err().code, ErrorCode::NoResults);
    }

    #[test]
    fn section_parsing() {
        assert_eq!(parse_sections("text, performance,text").unwrap(), [Section::Performance, Section::Text]);
        assert!(parse_sections("").unwrap().is_empty());
        assert_eq!(parse_sections("bogus").unwrap_err().code, ErrorCode::InvalidParameter);
    }
}
