//! Config-driven execution of operator chains.
//!
//! A [`PipelineConfig`] is validated against the operator registry, then
//! bound to its external resources as a [`Plan`]. Running a plan maps each
//! per-document stage over the corpus on a worker pool, preserving input
//! order, and finishes with dedup when configured.

mod config;
mod registry;
mod resources;

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{load_config, validate, ConfigError, Params, PipelineConfig, StageOp, StageSpec};
pub use registry::{find_operator, list_operators, OperatorKind, OperatorSpec, ParamSpec, ParamType};
pub use resources::Resources;

use crate::analyzer::sample_indices;
use crate::cleaners::{apply_rule, CleanRule};
use crate::corpus::{extract_html_text, Document, RecordError, Reformatted};
use crate::dedup::{dedup_corpus, DedupError, DedupParams, DupCluster};
use crate::filters::{self, FilterDecision, Lexicon, PerplexityThreshold, Script};
use crate::ngram::NgramModel;

pub const NEAR_DUPLICATE: &str = "near_duplicate";

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("stage {stage}, param '{param}': {message}")]
    Resource { stage: usize, param: String, message: String },
    #[error("strict mode: {0}")]
    Strict(RecordError),
    #[error("dedup: {0}")]
    Dedup(#[from] DedupError),
    #[error("worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: usize,
    pub operator: String,
    pub kind: Option<OperatorKind>,
    pub input_count: usize,
    pub kept: usize,
    pub dropped: usize,
    pub modified: usize,
    pub drop_reasons: BTreeMap<String, usize>,
    /// Stage-specific figures such as the perplexity threshold or match counts.
    pub details: BTreeMap<String, f64>,
    pub wall_time: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub complete: bool,
    pub seed: u64,
    pub workers: usize,
    pub input_count: usize,
    pub output_count: usize,
    pub record_errors: usize,
    pub stages: Vec<StageReport>,
    pub wall_time: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub documents: Vec<Document>,
    pub clusters: Vec<DupCluster>,
    pub report: RunReport,
}

/// A filter with its resources loaded.
#[derive(Debug, Clone)]
pub enum FilterExec {
    Length { min_chars: usize, max_chars: usize },
    AlphaRatio { min_ratio: f64, script: Script },
    ShortLines { short_line_max_chars: usize, max_fraction: f64 },
    DirtyWords { lexicon: Arc<Lexicon>, max_hits: usize },
    Perplexity { model: Arc<NgramModel>, fil_ppl: f64, reference_sample: usize },
    Language { models: Arc<BTreeMap<String, NgramModel>>, target: String, min_margin: f64 },
    EntityCount { min_entities: usize, max_entities: usize },
}

impl FilterExec {
    /// Decide every document. The perplexity threshold is taken from a
    /// sample of `docs` itself, drawn with `seed`; its statistics go into
    /// `details`.
    pub fn decide_all(&self, docs: &[Document], seed: u64, details: &mut BTreeMap<String, f64>) -> Vec<FilterDecision> {
        if let FilterExec::Perplexity { model, fil_ppl, reference_sample } = self {
            let idx = sample_indices(docs.len(), *reference_sample, seed);
            let thr = PerplexityThreshold::from_reference(model, idx.iter().map(|&i| &docs[i]), *fil_ppl)
                .unwrap_or(PerplexityThreshold { mean: 0.0, std: 0.0, s: *fil_ppl });
            details.insert("ppl_mean".into(), thr.mean);
            details.insert("ppl_std".into(), thr.std);
            details.insert("threshold".into(), thr.value());
            details.insert("reference_size".into(), idx.len() as f64);
            return docs.par_iter().map(|d| filters::filter_by_perplexity(d, model, &thr)).collect();
        }
        docs.par_iter().map(|d| self.decide(d)).collect()
    }

    fn decide(&self, doc: &Document) -> FilterDecision {
        match self {
            FilterExec::Length { min_chars, max_chars } => filters::filter_by_length(doc, *min_chars, *max_chars),
            FilterExec::AlphaRatio { min_ratio, script } => filters::filter_by_alpha_ratio(doc, *min_ratio, *script),
            FilterExec::ShortLines { short_line_max_chars, max_fraction } => {
                filters::filter_by_short_lines(doc, *short_line_max_chars, *max_fraction)
            }
            FilterExec::DirtyWords { lexicon, max_hits } => filters::filter_by_dirty_words(doc, lexicon, *max_hits),
            FilterExec::Language { models, target, min_margin } => {
                filters::filter_by_language(doc, models, target, *min_margin)
            }
            FilterExec::EntityCount { min_entities, max_entities } => {
                filters::filter_by_entity_count(doc, *min_entities, *max_entities)
            }
            FilterExec::Perplexity { .. } => unreachable!("perplexity needs corpus statistics"),
        }
    }
}

#[derive(Debug, Clone)]
enum Exec {
    Reformat,
    Clean(CleanRule),
    ExtractHtml,
    Filter(FilterExec),
    Dedup(DedupParams),
}

#[derive(Debug, Clone)]
struct PlannedStage {
    index: usize,
    operator: String,
    kind: OperatorKind,
    exec: Exec,
}

/// A validated config bound to its resources.
#[derive(Debug, Clone)]
pub struct Plan {
    pub config: PipelineConfig,
    stages: Vec<PlannedStage>,
}

fn resource_err(stage: usize, param: &str) -> impl Fn(String) -> PipelineError + '_ {
    move |message| PipelineError::Resource { stage, param: param.to_string(), message }
}

/// Load whatever a stage needs beyond its parameters.
fn bind(index: usize, op: StageOp, res: &Resources, seed: u64) -> Result<Exec, PipelineError> {
    Ok(match op {
        StageOp::Reformat { .. } => Exec::Reformat,
        StageOp::CleanText(rule) => Exec::Clean(rule),
        StageOp::ExtractHtml => Exec::ExtractHtml,
        StageOp::Length { min_chars, max_chars } => Exec::Filter(FilterExec::Length { min_chars, max_chars }),
        StageOp::AlphaRatio { min_ratio, script } => Exec::Filter(FilterExec::AlphaRatio { min_ratio, script }),
        StageOp::ShortLines { short_line_max_chars, max_fraction } => {
            Exec::Filter(FilterExec::ShortLines { short_line_max_chars, max_fraction })
        }
        StageOp::DirtyWords { lexicon_path, words, max_hits } => {
            let mut phrases: Vec<String> = words;
            if let Some(path) = lexicon_path {
                let lex = res.lexicon(&path).map_err(resource_err(index, "lexicon_path"))?;
                phrases.extend(lex.phrases());
            }
            Exec::Filter(FilterExec::DirtyWords { lexicon: Arc::new(Lexicon::from_phrases(phrases)), max_hits })
        }
        StageOp::Perplexity { fil_ppl, model_path, reference_sample } => {
            let model = match model_path {
                Some(p) => res.model(&p).map_err(resource_err(index, "model_path"))?,
                None => res
                    .default_lm
                    .clone()
                    .ok_or_else(|| resource_err(index, "model_path")("no model_path and no default model".into()))?,
            };
            Exec::Filter(FilterExec::Perplexity { model, fil_ppl, reference_sample })
        }
        StageOp::Language { models, target, min_margin } => {
            let mut loaded = BTreeMap::new();
            for (tag, path) in models {
                let m = res.model(&path).map_err(resource_err(index, "models"))?;
                loaded.insert(tag, Arc::unwrap_or_clone(m));
            }
            Exec::Filter(FilterExec::Language { models: Arc::new(loaded), target, min_margin })
        }
        StageOp::EntityCount { min_entities, max_entities } => {
            Exec::Filter(FilterExec::EntityCount { min_entities, max_entities })
        }
        StageOp::Dedup(p) => Exec::Dedup(DedupParams { seed, ..p }),
    })
}

/// Build one filter from an operator name and raw params, as the debugger
/// does for sweeps.
pub fn build_filter(
    operator: &str,
    params: &BTreeMap<String, serde_json::Value>,
    res: &Resources,
) -> Result<FilterExec, PipelineError> {
    let spec = find_operator(operator)
        .ok_or_else(|| ConfigError::invalid(0, None, format!("unknown operator '{operator}'")))?;
    if spec.kind != OperatorKind::Filter {
        return Err(ConfigError::invalid(0, None, format!("'{operator}' is not a filter")).into());
    }
    let stage = StageSpec { operator: operator.into(), kind: None, params: params.clone(), enabled: true };
    match bind(0, StageOp::parse(0, &stage, &spec)?, res, 0)? {
        Exec::Filter(f) => Ok(f),
        _ => unreachable!(),
    }
}

impl Plan {
    pub fn build(config: &PipelineConfig, res: &Resources) -> Result<Self, PipelineError> {
        let mut config = config.clone();
        validate(&mut config)?;
        let mut stages = Vec::new();
        for (index, stage) in config.stages.iter().enumerate().filter(|(_, s)| s.enabled) {
            let spec = find_operator(&stage.operator).expect("validated");
            let exec = bind(index, StageOp::parse(index, stage, &spec)?, res, config.seed)?;
            stages.push(PlannedStage { index, operator: spec.name, kind: spec.kind, exec });
        }
        Ok(Plan { config, stages })
    }

    pub fn stage_count(&self) -> usize {
        self.stages.len()
    }

    /// Input format requested by the first reformat stage, if any.
    pub fn input_format(&self) -> Option<crate::corpus::InputFormat> {
        self.config.stages.iter().enumerate().filter(|(_, s)| s.enabled).find_map(|(i, s)| {
            let spec = find_operator(&s.operator)?;
            match StageOp::parse(i, s, &spec).ok()? {
                StageOp::Reformat { format } => Some(format),
                _ => None,
            }
        })
    }
}

/// Run a plan over parsed input. Output order follows input order and is
/// independent of the worker count.
pub fn run_pipeline(plan: &Plan, input: Reformatted) -> Result<RunOutput, PipelineError> {
    if plan.config.strict {
        if let Some(e) = input.errors.first() {
            return Err(PipelineError::Strict(e.clone()));
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(plan.config.workers)
        .build()
        .map_err(|e| PipelineError::Pool(e.to_string()))?;
    pool.install(|| run_stages(plan, input))
}

fn run_stages(plan: &Plan, input: Reformatted) -> Result<RunOutput, PipelineError> {
    let started = Instant::now();
    let mut report = RunReport {
        complete: false,
        seed: plan.config.seed,
        workers: plan.config.workers,
        input_count: input.documents.len(),
        record_errors: input.errors.len(),
        ..Default::default()
    };
    let mut pending_errors = Some(input.errors);
    let mut docs = input.documents;
    let mut clusters = Vec::new();

    for stage in &plan.stages {
        let t = Instant::now();
        let mut sr = StageReport {
            stage: stage.index,
            operator: stage.operator.clone(),
            kind: Some(stage.kind),
            input_count: docs.len(),
            ..Default::default()
        };
        match &stage.exec {
            Exec::Reformat => {
                // The first reformat stage accounts for records that never
                // became documents.
                if let Some(errors) = pending_errors.take() {
                    sr.input_count += errors.len();
                    for e in &errors {
                        *sr.drop_reasons.entry(e.kind.reason().to_string()).or_default() += 1;
                    }
                    sr.dropped = errors.len();
                }
            }
            Exec::Clean(rule) => {
                let results: Vec<_> = docs.par_iter().map(|d| apply_rule(&d.text, rule)).collect();
                let (mut matches, mut failures) = (0usize, 0usize);
                for (doc, r) in docs.iter_mut().zip(results) {
                    match r {
                        Ok(r) => {
                            matches += r.matches;
                            if r.text != doc.text {
                                doc.text = r.text;
                                sr.modified += 1;
                            }
                        }
                        Err(_) => failures += 1,
                    }
                }
                sr.details.insert("matches".into(), matches as f64);
                if failures > 0 {
                    sr.details.insert("failures".into(), failures as f64);
                }
            }
            Exec::ExtractHtml => {
                let texts: Vec<String> = docs.par_iter().map(|d| extract_html_text(&d.text)).collect();
                for (doc, text) in docs.iter_mut().zip(texts) {
                    if text != doc.text {
                        doc.text = text;
                        sr.modified += 1;
                    }
                }
            }
            Exec::Filter(f) => {
                let decisions = f.decide_all(&docs, plan.config.seed, &mut sr.details);
                let mut kept = Vec::with_capacity(docs.len());
                for (doc, d) in docs.into_iter().zip(decisions) {
                    if d.keep {
                        kept.push(doc);
                    } else {
                        *sr.drop_reasons.entry(d.reason).or_default() += 1;
                        sr.dropped += 1;
                    }
                }
                docs = kept;
            }
            Exec::Dedup(params) => {
                let out = dedup_corpus(&docs, params)?;
                let r = &out.report;
                for (k, v) in [
                    ("clusters", r.clusters),
                    ("exempt", r.exempt),
                    ("candidate_pairs", r.candidate_pairs),
                    ("verified_pairs", r.verified_pairs),
                ] {
                    sr.details.insert(k.into(), v as f64);
                }
                sr.dropped = r.dropped;
                if r.dropped > 0 {
                    sr.drop_reasons.insert(NEAR_DUPLICATE.into(), r.dropped);
                }
                let keep: Vec<bool> = {
                    let mut k = vec![false; docs.len()];
                    out.kept.iter().for_each(|&i| k[i] = true);
                    k
                };
                docs = docs.into_iter().zip(keep).filter_map(|(d, k)| k.then_some(d)).collect();
                clusters = out.clusters;
            }
        }
        sr.kept = docs.len();
        sr.wall_time = t.elapsed().as_secs_f64();
        report.stages.push(sr);
    }

    report.output_count = docs.len();
    report.complete = true;
    report.wall_time = started.elapsed().as_secs_f64();
    Ok(RunOutput { documents: docs, clusters, report })
}

pub const REFINED_FILE: &str = "refined.jsonl";
pub const CLUSTERS_FILE: &str = "clusters.json";
pub const REPORT_FILE: &str = "report.json";

#[derive(Debug, thiserror::Error)]
pub enum ProcessError {
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("reading input: {0}")]
    Input(#[from] crate::corpus::CorpusError),
    /// Output could not be written; the report is flagged incomplete.
    #[error("writing output: {source}")]
    Output { source: std::io::Error, report: Box<RunReport> },
}

/// Read `input` (a file or directory), run the plan, and write
/// `refined.jsonl`, `clusters.json` and `report.json` into `output`.
pub fn process_path(plan: &Plan, input: &std::path::Path, output: &std::path::Path) -> Result<RunOutput, ProcessError> {
    let format = plan.input_format().unwrap_or(crate::corpus::InputFormat::Jsonl);
    let parsed = crate::corpus::read_corpus(input, format, false)?;
    let mut out = run_pipeline(plan, parsed)?;
    let write = |out: &RunOutput| -> std::io::Result<()> {
        std::fs::create_dir_all(output)?;
        crate::corpus::write_jsonl_file(&output.join(REFINED_FILE), &out.documents)?;
        std::fs::write(output.join(CLUSTERS_FILE), serde_json::to_vec_pretty(&out.clusters)?)?;
        std::fs::write(output.join(REPORT_FILE), serde_json::to_vec_pretty(&out.report)?)
    };
    if let Err(source) = write(&out) {
        out.report.complete = false;
        // Best effort: a partial report is still worth having.
        let _ = std::fs::write(output.join(REPORT_FILE), serde_json::to_vec_pretty(&out.report).unwrap_or_default());
        return Err(ProcessError::Output { source, report: Box::new(out.report) });
    }
    Ok(out)
}
