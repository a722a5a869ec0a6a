use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{fail, Error, ErrorCode, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    AP,
    #[serde(rename = "nDCG")]
    NDCG,
    P,
    R,
    RR,
    Bpref,
    Judged,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::AP => "AP",
            Family::NDCG => "nDCG",
            Family::P => "P",
            Family::R => "R",
            Family::RR => "RR",
            Family::Bpref => "Bpref",
            Family::Judged => "Judged",
        }
    }

    fn lookup(name: &str) -> Option<Family> {
        Some(match name.to_ascii_lowercase().as_str() {
            "ap" | "map" => Family::AP,
            "ndcg" => Family::NDCG,
            "p" => Family::P,
            "r" | "recall" => Family::R,
            "rr" | "mrr" => Family::RR,
            "bpref" => Family::Bpref,
            "judged" => Family::Judged,
            _ => return None,
        })
    }

    fn cutoff_rule(self) -> CutoffRule {
        match self {
            Family::P | Family::R | Family::Judged => CutoffRule::Required,
            Family::NDCG | Family::RR => CutoffRule::Optional,
            Family::AP | Family::Bpref => CutoffRule::Forbidden,
        }
    }
}

enum CutoffRule {
    Required,
    Optional,
    Forbidden,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gain {
    #[default]
    Linear,
    Exponential,
}

/// A measure family with its cutoff, relevance threshold and gain.
///
/// Text form is `NAME[@K]`, optionally followed by `;rel=N` and, for nDCG,
/// `;gain=exp`. Names are case-insensitive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MeasureSpec {
    pub family: Family,
    pub cutoff: Option<usize>,
    pub rel_threshold: i64,
    pub gain: Gain,
}

impl MeasureSpec {
    pub fn new(family: Family, cutoff: Option<usize>) -> Result<Self> {
        let spec = MeasureSpec {
            family,
            cutoff,
            rel_threshold: 1,
            gain: Gain::Linear,
        };
        spec.check()?;
        Ok(spec)
    }

    pub fn with_threshold(mut self, rel_threshold: i64) -> Result<Self> {
        self.rel_threshold = rel_threshold;
        self.check()?;
        Ok(self)
    }

    pub fn with_gain(mut self, gain: Gain) -> Result<Self> {
        self.gain = gain;
        self.check()?;
        Ok(self)
    }

    fn check(&self) -> Result<()> {
        match (self.family.cutoff_rule(), self.cutoff) {
            (CutoffRule::Required, None) => {
                return fail(
                    ErrorCode::MissingCutoff,
                    format!("{} requires a cutoff, e.g. {}@10", self.family.name(), self.family.name()),
                )
            }
            (CutoffRule::Forbidden, Some(_)) => {
                return fail(
                    ErrorCode::UnexpectedCutoff,
                    format!("{} does not take a cutoff", self.family.name()),
                )
            }
            (_, Some(0)) => return fail(ErrorCode::InvalidCutoff, "cutoff must be positive"),
            _ => {}
        }
        if self.rel_threshold < 1 {
            return fail(ErrorCode::InvalidThreshold, "relevance threshold must be >= 1");
        }
        if self.gain == Gain::Exponential && self.family != Family::NDCG {
            return fail(ErrorCode::InvalidParameter, "gain applies to nDCG only");
        }
        Ok(())
    }
}

impl fmt::Display for MeasureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.family.name())?;
        if let Some(k) = self.cutoff {
            write!(f, "@{k}")?;
        }
        if self.rel_threshold != 1 {
            write!(f, ";rel={}", self.rel_threshold)?;
        }
        if self.gain == Gain::Exponential {
            f.write_str(";gain=exp")?;
        }
        Ok(())
    }
}

impl FromStr for MeasureSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_measure_spec(s)
    }
}

/// Parses `NAME[@K][;rel=N][;gain=linear|exp]`.
pub fn parse_measure_spec(text: &str) -> Result<MeasureSpec> {
    let text = text.trim();
    if text.is_empty() {
        return fail(ErrorCode::UnknownMeasure, "empty measure name");
    }
    let mut parts = text.split(';');
    let head = parts.next().unwrap_or_default().trim();
    let (name, cutoff) = match head.split_once('@') {
        Some((n, k)) => {
            let k = match k.trim().parse::<i64>() {
                Ok(k) if k > 0 => k as usize,
                _ => return fail(ErrorCode::InvalidCutoff, format!("invalid cutoff '{k}'")),
            };
            (n.trim(), Some(k))
        }
        None => (head, None),
    };
    let Some(family) = Family::lookup(name) else {
        return fail(ErrorCode::UnknownMeasure, format!("unknown measure '{name}'"));
    };
    let mut spec = MeasureSpec {
        family,
        cutoff,
        rel_threshold: 1,
        gain: Gain::Linear,
    };
    for part in parts {
        let (key, value) = part.split_once('=').unwrap_or((part, ""));
        match key.trim().to_ascii_lowercase().as_str() {
            "rel" => {
                spec.rel_threshold = value.trim().parse().map_err(|_| {
                    Error::new(ErrorCode::InvalidThreshold, format!("invalid threshold '{value}'"))
                })?
            }
            "gain" => {
                spec.gain = match value.trim().to_ascii_lowercase().as_str() {
                    "linear" | "lin" => Gain::Linear,
                    "exp" | "exponential" => Gain::Exponential,
                    other => {
                        return fail(ErrorCode::InvalidParameter, format!("unknown gain '{other}'"))
                    }
                }
            }
            other => {
                return fail(
                    ErrorCode::InvalidParameter,
                    format!("unknown measure option '{other}'"),
                )
            }
        }
    }
    spec.check()?;
    Ok(spec)
}

/// Parses a comma-separated list of measure specs.
pub fn parse_measure_list(text: &str) -> Result<Vec<MeasureSpec>> {
    let specs = text
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(parse_measure_spec)
        .collect::<Result<Vec<_>>>()?;
    if specs.is_empty() {
        return fail(ErrorCode::UnknownMeasure, "no measures given");
    }
    Ok(specs)
}
