use std::collections::BTreeMap;
use std::net::{IpAddr, Ipv4Addr};
use std::path::{Path, PathBuf};
use std::sync::atomic::AtomicU64;
use std::sync::{Arc, Mutex};

use garden_core::analyzer::{compute_stats, CorpusStats, StatsModels, StatsOptions};
use garden_core::api::{ConfigVersion, RunStatus};
use garden_core::corpus::read_documents;
use garden_core::ngram::NgramModel;
use garden_core::pipeline::Resources;
use garden_core::retriever::{build_index, Bm25Params, Index, DEFAULT_SHARDS};
use garden_core::Document;

#[derive(Debug, Clone)]
pub struct ServeOptions {
    pub index: Option<PathBuf>,
    pub stats: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    pub config: Option<PathBuf>,
    /// Reference model for perplexity stats and filters.
    pub lm: Option<PathBuf>,
    pub languages: Vec<(String, PathBuf)>,
    pub host: IpAddr,
    pub port: u16,
}

impl Default for ServeOptions {
    fn default() -> Self {
        ServeOptions {
            index: None,
            stats: None,
            corpus: None,
            config: None,
            lm: None,
            languages: Vec::new(),
            host: IpAddr::V4(Ipv4Addr::LOCALHOST),
            port: 8080,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum StartupError {
    #[error("at least one of an index or a corpus is required")]
    NothingToServe,
    #[error("{what} {path}: {message}")]
    Load { what: &'static str, path: PathBuf, message: String },
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: String, source: std::io::Error },
}

fn load_err<'a>(what: &'static str, path: &'a Path) -> impl Fn(String) -> StartupError + 'a {
    move |message| StartupError::Load { what, path: path.to_path_buf(), message }
}

/// Everything loaded at startup. Never mutated afterwards.
pub struct Artifacts {
    pub index: Index,
    pub corpus: Option<Vec<Document>>,
    pub stats: Option<CorpusStats>,
    pub lm: Option<Arc<NgramModel>>,
    pub languages: Option<BTreeMap<String, NgramModel>>,
    pub resources: Resources,
}

impl Artifacts {
    pub fn models(&self) -> StatsModels<'_> {
        StatsModels { lm: self.lm.as_deref(), languages: self.languages.as_ref() }
    }
}

pub struct ConfigStore {
    pub path: Option<PathBuf>,
    pub current: ConfigVersion,
}

/// `c.yaml` version 3 is written as `c.v3.yaml`.
pub fn versioned_path(path: &Path, version: u64) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}.v{version}.{}", ext.to_string_lossy()),
        None => format!("{stem}.v{version}"),
    };
    path.with_file_name(name)
}

pub struct AppState {
    pub artifacts: Arc<Artifacts>,
    pub config: Mutex<ConfigStore>,
    pub runs: Mutex<BTreeMap<u64, RunStatus>>,
    pub next_run: AtomicU64,
    pub run_lock: Arc<tokio::sync::Mutex<()>>,
}

pub fn load_model(path: &Path) -> Result<NgramModel, StartupError> {
    let bytes = std::fs::read(path).map_err(|e| load_err("model", path)(e.to_string()))?;
    NgramModel::from_bytes(&bytes).map_err(|e| load_err("model", path)(e.to_string()))
}

impl AppState {
    pub fn load(opts: &ServeOptions) -> Result<Self, StartupError> {
        if opts.index.is_none() && opts.corpus.is_none() {
            return Err(StartupError::NothingToServe);
        }
        let corpus = match &opts.corpus {
            Some(p) => Some(read_documents(p).map_err(|e| load_err("corpus", p)(e.to_string()))?),
            None => None,
        };
        let index = match (&opts.index, &corpus) {
            (Some(p), _) => Index::open(p).map_err(|e| load_err("index", p)(e.to_string()))?,
            (None, Some(docs)) => build_index(docs, DEFAULT_SHARDS, Bm25Params::default())
                .map_err(|e| load_err("corpus", opts.corpus.as_deref().unwrap())(e.to_string()))?,
            (None, None) => unreachable!(),
        };
        let lm = opts.lm.as_deref().map(load_model).transpose()?.map(Arc::new);
        let languages = if opts.languages.is_empty() {
            None
        } else {
            let mut m = BTreeMap::new();
            for (tag, path) in &opts.languages {
                m.insert(tag.clone(), load_model(path)?);
            }
            Some(m)
        };
        let mut resources = Resources::new();
        if let Some(lm) = &lm {
            resources = resources.with_default_lm(lm.clone());
        }
        let mut artifacts = Artifacts { index, corpus, stats: None, lm, languages, resources };
        artifacts.stats = match (&opts.stats, &artifacts.corpus) {
            (Some(p), _) => {
                let bytes = std::fs::read(p).map_err(|e| load_err("stats", p)(e.to_string()))?;
                Some(serde_json::from_slice(&bytes).map_err(|e| load_err("stats", p)(e.to_string()))?)
            }
            (None, Some(docs)) => Some(compute_stats(docs, artifacts.models(), &StatsOptions::default())),
            (None, None) => None,
        };
        let content = match &opts.config {
            Some(p) if p.exists() => std::fs::read_to_string(p).map_err(|e| load_err("config", p)(e.to_string()))?,
            _ => String::new(),
        };
        let config = ConfigStore {
            path: opts.config.clone(),
            current: ConfigVersion {
                version: 0,
                path: opts.config.as_ref().map(|p| p.display().to_string()),
                content,
            },
        };
        Ok(AppState {
            artifacts: Arc::new(artifacts),
            config: Mutex::new(config),
            runs: Mutex::new(BTreeMap::new()),
            next_run: AtomicU64::new(1),
            run_lock: Arc::new(tokio::sync::Mutex::new(())),
        })
    }
}
