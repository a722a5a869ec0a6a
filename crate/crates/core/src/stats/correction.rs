use serde::{Deserialize, Serialize};

use crate::error::{fail, ErrorCode, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrectionMethod {
    #[default]
    Holm,
    Bonferroni,
}

impl std::str::FromStr for CorrectionMethod {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "holm" => Ok(CorrectionMethod::Holm),
            "bonferroni" => Ok(CorrectionMethod::Bonferroni),
            other => Err(format!("unknown correction '{other}'")),
        }
    }
}

/// Adjusted p-values in input order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionResult {
    pub raw_p: Vec<f64>,
    pub adjusted_p: Vec<f64>,
    pub reject: Vec<bool>,
    pub alpha: f64,
    pub method: CorrectionMethod,
}

fn check(raw_p: &[f64], alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return fail(ErrorCode::InvalidParameter, format!("alpha {alpha} outside (0, 1)"));
    }
    if let Some(p) = raw_p.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return fail(ErrorCode::InvalidPvalue, format!("p-value {p} outside [0, 1]"));
    }
    Ok(())
}

fn finish(raw_p: &[f64], adjusted_p: Vec<f64>, alpha: f64, method: CorrectionMethod) -> CorrectionResult {
    let reject = adjusted_p.iter().map(|&p| p <= alpha).collect();
    CorrectionResult {
        raw_p: raw_p.to_vec(),
        adjusted_p,
        reject,
        alpha,
        method,
    }
}

/// Holm's step-down procedure.
pub fn holm_correction(raw_p: &[f64], alpha: f64) -> Result<CorrectionResult> {
    check(raw_p, alpha)?;
    let m = raw_p.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| raw_p[i].total_cmp(&raw_p[j]).then(i.cmp(&j)));
    let mut adjusted = vec![0.0; m];
    let mut running = 0.0f64;
    for (step, &i) in order.iter().enumerate() {
        let scaled = ((m - step) as f64 * raw_p[i]).min(1.0);
        running = running.max(scaled);
        adjusted[i] = running;
    }
    Ok(finish(raw_p, adjusted, alpha, CorrectionMethod::Holm))
}

pub fn bonferroni_correction(raw_p: &[f64], alpha: f64) -> Result<CorrectionResult> {
    check(raw_p, alpha)?;
    let m = raw_p.len() as f64;
    let adjusted = raw_p.iter().map(|p| (m * p).min(1.0)).collect();
    Ok(finish(raw_p, adjusted, alpha, CorrectionMethod::Bonferroni))
}

pub fn correct(method: CorrectionMethod, raw_p: &[f64], alpha: f64) -> Result<CorrectionResult> {
    match method {
        CorrectionMethod::Holm => holm_correction(raw_p, alpha),
        CorrectionMethod::Bonferroni => bonferroni_correction(raw_p, alpha),
    }
}
