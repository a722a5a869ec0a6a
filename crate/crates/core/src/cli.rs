//! Command-line front end. [`run`] returns the process exit code: 0 on
//! success, 1 for data or domain errors, 2 for usage errors.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{ArgGroup, Args, Parser, Subcommand};
use serde::Deserialize;

use crate::engine::{
    AnalysisOutput, AnalysisRequest, CompareParams, EvaluateParams, InputKind, DEFAULT_ALPHA, DEFAULT_MEASURES,
};
use crate::error::Error;
use crate::measures::{parse_measure_list, MissingQueryPolicy};
use crate::report::{
    eval_table_csv, import_session_json, label, parse_sections, render_html_report, significance_table_csv, Section,
};
use crate::server::{utc_now, SessionStore, DEFAULT_MAX_UPLOAD};
use crate::session::AnalysisSession;
use crate::stats::{CorrectionMethod, TestKind};
use crate::trec_io::{
    parse_qrels, parse_queries, parse_runs, validate_alignment, QueryFormat, RunStore, ValidationReport,
};

const LOCAL_SESSION: &str = "local";

#[derive(Parser, Debug)]
#[command(name = "rankscope", version, about = "Evaluate and compare TREC-style retrieval runs")]
struct Cli {
    /// TOML file with default option values; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check query, qrels and run files and report problems.
    Validate(ValidateArgs),
    /// Score runs and write the per-query table.
    Eval(EvalArgs),
    /// Test runs against a baseline.
    Compare(CompareArgs),
    /// Run the default analyses and write an HTML report.
    Report(ReportArgs),
    /// Start the HTTP server.
    Serve(ServeArgs),
}

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("inputs").required(true).multiple(true).args(["queries", "qrels", "run"])))]
struct ValidateArgs {
    #[arg(long)]
    queries: Option<PathBuf>,
    #[arg(long)]
    qrels: Option<PathBuf>,
    #[arg(long)]
    run: Vec<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    qrels: PathBuf,
    #[arg(long, required = true)]
    run: Vec<PathBuf>,
    /// Comma-separated measures, e.g. AP,nDCG@10,P@5.
    #[arg(long)]
    measures: Option<String>,
    /// zero_fill or intersect.
    #[arg(long)]
    policy: Option<String>,
    /// Where to write the CSV table.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[arg(long)]
    qrels: PathBuf,
    #[arg(long, required = true)]
    run: Vec<PathBuf>,
    /// Baseline run id; defaults to the first run.
    #[arg(long)]
    baseline: Option<String>,
    /// One or more comma-separated measures.
    #[arg(long, alias = "measures")]
    measure: Option<String>,
    /// t or wilcoxon.
    #[arg(long)]
    test: Option<String>,
    /// holm or bonferroni.
    #[arg(long)]
    correction: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    policy: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("source").required(true).multiple(true).args(["session", "qrels", "queries"])))]
struct ReportArgs {
    /// A session export to report on.
    #[arg(long, conflicts_with_all = ["queries", "qrels", "run"])]
    session: Option<PathBuf>,
    #[arg(long)]
    queries: Option<PathBuf>,
    #[arg(long)]
    qrels: Option<PathBuf>,
    #[arg(long)]
    run: Vec<PathBuf>,
    /// Comma-separated subset of performance,query,text,collection.
    #[arg(long)]
    sections: Option<String>,
    #[arg(long)]
    out: PathBuf,
    /// Fixed generation timestamp, for reproducible output.
    #[arg(long)]
    timestamp: Option<String>,
}

#[derive(Args, Debug)]
struct ServeArgs {
    #[arg(long)]
    addr: Option<String>,
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// Per-file upload limit in bytes; K, M and G suffixes are accepted.
    #[arg(long)]
    max_upload: Option<String>,
}

/// Defaults read from `--config`.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Config {
    measures: Option<String>,
    policy: Option<String>,
    baseline: Option<String>,
    test: Option<String>,
    correction: Option<String>,
    alpha: Option<f64>,
    sections: Option<String>,
    addr: Option<String>,
    data_dir: Option<PathBuf>,
    max_upload: Option<String>,
}

enum Failure {
    Usage(String),
    Domain(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Domain(e.to_string())
    }
}

fn usage(e: Error) -> Failure {
    Failure::Usage(e.to_string())
}

type CmdResult = Result<(), Failure>;

fn io_err(path: &Path, e: std::io::Error) -> Failure {
    Failure::Domain(format!("{}: {e}", path.display()))
}

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    std::fs::read(path).map_err(|e| io_err(path, e))
}

fn file_name(path: &Path) -> String {
    path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned())
}

fn parse_flag<T: std::str::FromStr<Err = String>>(value: Option<&str>, default: T) -> Result<T, Failure> {
    match value {
        Some(v) => v.parse().map_err(Failure::Usage),
        None => Ok(default),
    }
}

fn check_alpha(alpha: f64) -> CmdResult {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Failure::Usage(format!("--alpha must lie in (0, 1), got {alpha}")))
    }
}

fn parse_size(text: &str) -> Result<usize, Failure> {
    let t = text.trim();
    let (digits, mult) = match t.char_indices().last() {
        Some((i, c)) if c.is_ascii_alphabetic() => {
            let m = match c.to_ascii_uppercase() {
                'K' => 1usize << 10,
                'M' => 1 << 20,
                'G' => 1 << 30,
                _ => return Err(Failure::Usage(format!("bad size '{text}'"))),
            };
            (&t[..i], m)
        }
        _ => (t, 1),
    };
    digits
        .trim()
        .parse::<usize>()
        .ok()
        .and_then(|n| n.checked_mul(mult))
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::Usage(format!("bad size '{text}'")))
}

fn load_session(
    queries: Option<&Path>,
    qrels: Option<&Path>,
    runs: &[PathBuf],
    now: &str,
) -> Result<AnalysisSession, Failure> {
    let mut session = AnalysisSession::new(LOCAL_SESSION, now);
    let files = queries
        .map(|p| (InputKind::Queries, p))
        .into_iter()
        .chain(qrels.map(|p| (InputKind::Qrels, p)))
        .chain(runs.iter().map(|p| (InputKind::Run, p.as_path())));
    for (kind, path) in files {
        let raw = read(path)?;
        session.ingest(kind, &file_name(path), &raw, now).map_err(|e| {
            let detail = serde_json::from_value::<ValidationReport>(e.details.clone())
                .map(|r| format!("\n{}", r.render(&path.display().to_string())))
                .unwrap_or_default();
            Failure::Domain(format!("{}: {e}{detail}", path.display()))
        })?;
    }
    Ok(session)
}

fn run_request(session: &mut AnalysisSession, request: &AnalysisRequest, now: &str) -> Result<AnalysisOutput, Failure> {
    let reference = session.run_inline(request, now)?;
    match session.output(&reference) {
        Ok(out) => Ok(out.clone()),
        Err(_) => {
            let stored = session.stored(&reference)?;
            Err(stored.error.clone().map_or_else(|| Failure::Domain("analysis failed".into()), Failure::from))
        }
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> CmdResult {
    std::fs::write(path, bytes).map_err(|e| io_err(path, e))
}

fn cmd_validate(args: ValidateArgs, out: &mut dyn Write) -> CmdResult {
    let mut failed = false;
    let mut queries = None;
    let mut qrels = None;
    let mut runs: Vec<RunStore> = Vec::new();
    let mut show = |title: &Path, report: &ValidationReport, out: &mut dyn Write| {
        failed |= !report.is_ok();
        let _ = write!(out, "{}", report.render(&title.display().to_string()));
    };
    if let Some(path) = &args.queries {
        match parse_queries(&read(path)?, QueryFormat::Auto) {
            Ok(p) => {
                show(path, &p.report, out);
                queries = Some(p.value);
            }
            Err(report) => show(path, &report, out),
        }
    }
    if let Some(path) = &args.qrels {
        match parse_qrels(&read(path)?) {
            Ok(p) => {
                show(path, &p.report, out);
                qrels = Some(p.value);
            }
            Err(report) => show(path, &report, out),
        }
    }
    for path in &args.run {
        match parse_runs(&read(path)?) {
            Ok(p) => {
                show(path, &p.report, out);
                runs.extend(p.value);
            }
            Err(report) => show(path, &report, out),
        }
    }
    if let Some(qrels) = &qrels {
        let alignment = validate_alignment(queries.as_ref(), qrels, &runs);
        show(Path::new("alignment"), &alignment, out);
    }
    if failed {
        Err(Failure::Domain("validation found errors".into()))
    } else {
        Ok(())
    }
}

fn print_means(matrix: &crate::measures::EvalMatrix, out: &mut dyn Write) {
    let measures: Vec<String> = matrix.measures().map(ToString::to_string).collect();
    let width = matrix.run_ids.iter().map(String::len).max().unwrap_or(3).max(3);
    let _ = write!(out, "{:width$}", "run");
    for m in &measures {
        let _ = write!(out, "  {m:>10}");
    }
    let _ = writeln!(out);
    for run in &matrix.run_ids {
        let _ = write!(out, "{run:width$}");
        for m in matrix.measures() {
            let _ = write!(out, "  {:>10.6}", matrix.mean(run, m).unwrap_or(0.0));
        }
        let _ = writeln!(out);
    }
}

fn cmd_eval(args: EvalArgs, config: &Config, out: &mut dyn Write) -> CmdResult {
    let measures = args.measures.or(config.measures.clone()).unwrap_or_else(|| DEFAULT_MEASURES.into());
    let specs = parse_measure_list(&measures).map_err(usage)?;
    let policy = parse_flag(args.policy.as_deref().or(config.policy.as_deref()), MissingQueryPolicy::ZeroFill)?;
    let now = utc_now();
    let mut session = load_session(None, Some(&args.qrels), &args.run, &now)?;
    let request = AnalysisRequest::Evaluate(EvaluateParams {
        measures: specs.iter().map(ToString::to_string).collect(),
        policy,
    });
    let AnalysisOutput::Evaluate(matrix) = run_request(&mut session, &request, &now)? else {
        unreachable!("evaluate yields a matrix")
    };
    print_means(&matrix, out);
    if let Some(path) = &args.out {
        write_file(path, &eval_table_csv(&matrix))?;
    }
    Ok(())
}

fn cmd_compare(args: CompareArgs, config: &Config, out: &mut dyn Write) -> CmdResult {
    let measures = args.measure.or(config.measures.clone()).unwrap_or_else(|| "AP".into());
    let specs = parse_measure_list(&measures).map_err(usage)?;
    let test = parse_flag(args.test.as_deref().or(config.test.as_deref()), TestKind::TTest)?;
    let correction = parse_flag(args.correction.as_deref().or(config.correction.as_deref()), CorrectionMethod::Holm)?;
    let policy = parse_flag(args.policy.as_deref().or(config.policy.as_deref()), MissingQueryPolicy::ZeroFill)?;
    let alpha = args.alpha.or(config.alpha).unwrap_or(DEFAULT_ALPHA);
    check_alpha(alpha)?;
    let now = utc_now();
    let mut session = load_session(None, Some(&args.qrels), &args.run, &now)?;
    let run_ids = session.run_ids();
    if run_ids.len() < 2 {
        return Err(Failure::Usage(format!(
            "compare needs at least 2 runs, found {}",
            run_ids.len()
        )));
    }
    let request = AnalysisRequest::Compare(CompareParams {
        measures: specs.iter().map(ToString::to_string).collect(),
        baseline: args.baseline.or(config.baseline.clone()),
        test,
        correction,
        alpha,
        policy,
    });
    let AnalysisOutput::Compare(comparison) = run_request(&mut session, &request, &now)? else {
        unreachable!("compare yields a comparison")
    };
    let _ = writeln!(
        out,
        "baseline {}  test {}  correction {}  alpha {alpha}",
        comparison.baseline,
        label(&comparison.test),
        label(&comparison.correction)
    );
    let _ = writeln!(
        out,
        "{:<20} {:<12} {:>12} {:>10} {:>10}  verdict",
        "comparison", "measure", "statistic", "p", "adjusted"
    );
    for row in &comparison.rows {
        let _ = writeln!(
            out,
            "{:<20} {:<12} {:>12.6} {:>10.6} {:>10.6}  {}",
            row.comparison,
            row.measure.to_string(),
            row.test.statistic,
            row.test.p_value,
            row.adjusted_p,
            if row.significant { "significant" } else { "not significant" }
        );
    }
    if let Some(path) = &args.out {
        write_file(path, &significance_table_csv(&comparison.rows)?)?;
    }
    Ok(())
}

fn cmd_report(args: ReportArgs, config: &Config, out: &mut dyn Write) -> CmdResult {
    let sections = match args.sections.as_deref().or(config.sections.as_deref()) {
        Some(text) => parse_sections(text).map_err(usage)?,
        None => Section::ALL.to_vec(),
    };
    let now = args.timestamp.clone().unwrap_or_else(utc_now);
    let mut session = match &args.session {
        Some(path) => import_session_json(&read(path)?)?,
        None => load_session(args.queries.as_deref(), args.qrels.as_deref(), &args.run, &now)?,
    };
    session.run_default_suite(&now)?;
    let html = render_html_report(&session, &sections, &now)?;
    write_file(&args.out, &html)?;
    let _ = writeln!(out, "wrote {} ({} bytes)", args.out.display(), html.len());
    Ok(())
}

fn cmd_serve(args: ServeArgs, config: &Config, err: &mut dyn Write) -> CmdResult {
    let addr = args.addr.or(config.addr.clone()).unwrap_or_else(|| "127.0.0.1:8080".into());
    let data_dir = args
        .data_dir
        .or(config.data_dir.clone())
        .unwrap_or_else(|| PathBuf::from("rankscope-data"));
    let max_upload = match args.max_upload.or(config.max_upload.clone()) {
        Some(text) => parse_size(&text)?,
        None => DEFAULT_MAX_UPLOAD,
    };
    let _ = tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .try_init();
    let store = SessionStore::open_with(&data_dir, crate::server::Execution::Background, max_upload)?;
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Failure::Domain(format!("cannot start runtime: {e}")))?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .map_err(|e| Failure::Domain(format!("cannot bind {addr}: {e}")))?;
        let local = listener.local_addr().map_err(|e| Failure::Domain(e.to_string()))?;
        let _ = writeln!(err, "listening on http://{local} (data in {})", data_dir.display());
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        crate::server::serve(listener, std::sync::Arc::new(store), shutdown)
            .await
            .map_err(|e| Failure::Domain(format!("server error: {e}")))
    })
}

fn load_config(path: &Path) -> Result<Config, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let rendered = e.render().to_string();
            let _ = if code == 0 { write!(out, "{rendered}") } else { write!(err, "{rendered}") };
            return code;
        }
    };
    let config = match cli.config.as_deref().map(load_config).transpose() {
        Ok(c) => c.unwrap_or_default(),
        Err(f) => return report_failure(f, err),
    };
    let result = match cli.command {
        Command::Validate(a) => cmd_validate(a, out),
        Command::Eval(a) => cmd_eval(a, &config, out),
        Command::Compare(a) => cmd_compare(a, &config, out),
        Command::Report(a) => cmd_report(a, &config, out),
        Command::Serve(a) => cmd_serve(a, &config, err),
    };
    match result {
        Ok(()) => 0,
        Err(f) => report_failure(f, err),
    }
}

fn report_failure(failure: Failure, err: &mut dyn Write) -> i32 {
    match failure {
        Failure::Usage(msg) => {
            let _ = writeln!(err, "usage error: {msg}");
            2
        }
        Failure::Domain(msg) => {
            let _ = writeln!(err, "error: {msg}");
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(std::iter::once("rankscope").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(run_capture(&["validate"]).0, 2);
        assert_eq!(run_capture(&["eval", "--qrels", "x"]).0, 2);
        assert_eq!(run_capture(&["bogus"]).0, 2);
        assert_eq!(run_capture(&["--help"]).0, 0);
    }

    #[test]
    fn sizes() {
        assert_eq!(parse_size("512M").ok(), Some(512 << 20));
        assert_eq!(parse_size("100").ok(), Some(100));
        assert!(parse_size("12X").is_err());
        assert!(parse_size("0").is_err());
    }

    #[test]
    fn measure_error_is_usage_even_with_missing_files() {
        let (code, _, err) = run_capture(&["eval", "--qrels", "/nonexistent", "--run", "/nonexistent", "--measures", "P"]);
        assert_eq!(code, 2, "{err}");
        assert!(err.contains("MISSING_CUTOFF"));
    }
}
