//! JSON bodies of the HTTP service that are not core result types
//! themselves. Shared by the server, the client and the CLI so that both
//! interfaces print identical payloads.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::analyzer::{CorpusStats, StatsDiff};
use crate::pipeline::RunReport;
use crate::retriever::SearchHit;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResponse {
    pub query: String,
    pub k: usize,
    pub hits: Vec<SearchHit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffResponse {
    pub raw: CorpusStats,
    pub refined: CorpusStats,
    pub diff: StatsDiff,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigVersion {
    pub version: u64,
    pub path: Option<String>,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunRequest {
    #[serde(default)]
    pub config_path: Option<String>,
    pub input: String,
    pub output: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunState {
    Running,
    Succeeded,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunStatus {
    pub id: u64,
    pub state: RunState,
    pub input: String,
    pub output: String,
    pub report: Option<RunReport>,
    pub error: Option<String>,
}

/// Error body of every failed request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    #[serde(default)]
    pub detail: BTreeMap<String, Value>,
}

fn is_corpus_path(p: &std::path::Path) -> bool {
    p.is_dir() || p.extension().is_some_and(|e| e == "jsonl")
}

/// Compare two corpora or stats files. Corpora (directories or `.jsonl`
/// files) are measured with `models`; the refined side is binned with the
/// raw side's edges whenever it is computed here.
pub fn diff_paths(
    raw: &std::path::Path,
    refined: &std::path::Path,
    models: crate::analyzer::StatsModels<'_>,
) -> Result<DiffResponse, String> {
    use crate::analyzer::{compute_stats, diff_stats, StatsOptions};
    let load_stats = |p: &std::path::Path| -> Result<CorpusStats, String> {
        let bytes = std::fs::read(p).map_err(|e| format!("cannot read {}: {e}", p.display()))?;
        serde_json::from_slice(&bytes).map_err(|e| format!("{} is not a stats file: {e}", p.display()))
    };
    let load_docs = |p: &std::path::Path| {
        crate::corpus::read_documents(p).map_err(|e| format!("cannot read corpus {}: {e}", p.display()))
    };
    let raw_stats = if is_corpus_path(raw) {
        compute_stats(&load_docs(raw)?, models, &StatsOptions::default())
    } else {
        load_stats(raw)?
    };
    let refined_stats = if is_corpus_path(refined) {
        compute_stats(&load_docs(refined)?, models, &StatsOptions::aligned_with(&raw_stats))
    } else {
        load_stats(refined)?
    };
    let diff = diff_stats(&raw_stats, &refined_stats);
    Ok(DiffResponse { raw: raw_stats, refined: refined_stats, diff })
}
