//! Parameter sweeps for filters and match previews for cleaner rules.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::sample;
use crate::cleaners::{apply_rule, CleanError, CleanRule, RuleSpec};
use crate::corpus::Document;
use crate::pipeline::{build_filter, find_operator, OperatorKind, ParamType, PipelineError, Resources};

pub const DEFAULT_SAMPLE: usize = 1000;
pub const DEFAULT_MAX_CASES: usize = 10;

#[derive(Debug, thiserror::Error)]
pub enum DebugError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Clean(#[from] CleanError),
}

fn default_sample() -> usize {
    DEFAULT_SAMPLE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRequest {
    pub filter: String,
    pub param: String,
    pub values: Vec<f64>,
    #[serde(default = "default_sample")]
    pub sample: usize,
    #[serde(default)]
    pub seed: u64,
    /// Fixed values for the filter's other params; defaults otherwise.
    #[serde(default)]
    pub params: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub filter: String,
    pub param: String,
    pub values: Vec<f64>,
    /// Dropped / sample size, one per value.
    pub filter_ratio: Vec<f64>,
    pub dropped: Vec<usize>,
    pub sample_size: usize,
    pub seed: u64,
}

/// Filter ratio of one filter at each value of one parameter, all on the
/// same seeded sample.
pub fn sweep_filter(corpus: &[Document], req: &SweepRequest, res: &Resources) -> Result<SweepResult, DebugError> {
    let bad = |m: String| DebugError::InvalidRequest(m);
    let spec = find_operator(&req.filter).ok_or_else(|| bad(format!("unknown filter '{}'", req.filter)))?;
    if spec.kind != OperatorKind::Filter {
        return Err(bad(format!("'{}' is not a filter", req.filter)));
    }
    let param = spec.param(&req.param).ok_or_else(|| bad(format!("'{}' has no parameter '{}'", req.filter, req.param)))?;
    if !param.ty.is_numeric() {
        return Err(bad(format!("parameter '{}' is not numeric", req.param)));
    }
    if req.values.is_empty() {
        return Err(bad("values must not be empty".into()));
    }
    if req.sample == 0 {
        return Err(bad("sample must be >= 1".into()));
    }
    let docs = sample(corpus, req.sample, req.seed);
    let mut ratios = Vec::with_capacity(req.values.len());
    let mut dropped = Vec::with_capacity(req.values.len());
    for &v in &req.values {
        let value = match param.ty {
            ParamType::Int if v >= 0.0 && v.fract() == 0.0 && v <= u64::MAX as f64 => Value::from(v as u64),
            ParamType::Int => return Err(bad(format!("'{}' takes non-negative integers, got {v}", req.param))),
            _ => serde_json::Number::from_f64(v).map(Value::Number).ok_or_else(|| bad(format!("value {v} is not finite")))?,
        };
        let mut params = req.params.clone();
        params.insert(req.param.clone(), value);
        let filter = build_filter(&req.filter, &params, res)?;
        let decisions = filter.decide_all(&docs, req.seed, &mut BTreeMap::new());
        let n = decisions.iter().filter(|d| !d.keep).count();
        dropped.push(n);
        ratios.push(if docs.is_empty() { 0.0 } else { n as f64 / docs.len() as f64 });
    }
    Ok(SweepResult {
        filter: req.filter.clone(),
        param: req.param.clone(),
        values: req.values.clone(),
        filter_ratio: ratios,
        dropped,
        sample_size: docs.len(),
        seed: req.seed,
    })
}

fn default_max_cases() -> usize {
    DEFAULT_MAX_CASES
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreviewRequest {
    pub rule: RuleSpec,
    #[serde(default = "default_sample")]
    pub sample: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_max_cases")]
    pub max_cases: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchCase {
    pub doc_id: String,
    /// Byte offsets into the document text.
    pub start: usize,
    pub end: usize,
    pub matched: String,
    pub context: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchCaseReport {
    pub rule: RuleSpec,
    pub sample_size: usize,
    pub seed: u64,
    pub total_matches: usize,
    pub docs_matched: usize,
    pub cases: Vec<MatchCase>,
}

/// Dry-run a rule over a sample. Nothing is modified.
pub fn preview_clean(corpus: &[Document], req: &PreviewRequest) -> Result<MatchCaseReport, DebugError> {
    if req.sample == 0 {
        return Err(DebugError::InvalidRequest("sample must be >= 1".into()));
    }
    let rule = CleanRule::compile(req.rule.clone())?;
    let docs = sample(corpus, req.sample, req.seed);
    let mut report = MatchCaseReport {
        rule: req.rule.clone(),
        sample_size: docs.len(),
        seed: req.seed,
        total_matches: 0,
        docs_matched: 0,
        cases: Vec::new(),
    };
    for d in &docs {
        let r = apply_rule(&d.text, &rule)?;
        if r.matches == 0 {
            continue;
        }
        report.total_matches += r.matches;
        report.docs_matched += 1;
        for s in r.spans {
            if report.cases.len() >= req.max_cases {
                break;
            }
            report.cases.push(MatchCase {
                doc_id: d.id.clone(),
                start: s.start,
                end: s.end,
                matched: d.text[s.start..s.end].to_string(),
                context: s.context,
            });
        }
    }
    Ok(report)
}
