use std::net::IpAddr;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use garden_core::cleaners::{Action, MatcherKind, Scope};
use garden_core::corpus::InputFormat;

#[derive(Debug, Parser)]
#[command(name = "garden", version, about = "Corpus curation: clean, filter, dedup, analyze and search text corpora")]
pub struct Cli {
    /// Send analysis requests to a running `garden serve` instead of
    /// computing locally. Used only when no local input is given.
    #[arg(long, global = true, env = garden_client::SERVER_ENV)]
    pub server: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Turn raw files into JSONL documents.
    Reformat(ReformatArgs),
    /// Run a pipeline config over a corpus.
    Process(ProcessArgs),
    /// Corpus statistics, or a raw/refined comparison with --compare.
    Analyze(AnalyzeArgs),
    /// Character n-gram language models.
    #[command(subcommand)]
    Lm(LmCommand),
    /// Near-duplicate removal with MinHash LSH.
    Dedup(DedupArgs),
    /// Sharded BM25 indexes.
    #[command(subcommand)]
    Index(IndexCommand),
    /// Query an index.
    Search(SearchArgs),
    /// Filter sweeps and cleaning previews.
    #[command(subcommand)]
    Debug(DebugCommand),
    /// Serve the HTTP API.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct ReformatArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "jsonl")]
    pub format: InputFormat,
    /// Write documents here instead of stdout; a summary goes to stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Fail on the first bad record.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Args)]
pub struct ProcessArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    /// Output directory for refined.jsonl, clusters.json and report.json.
    #[arg(long)]
    pub output: PathBuf,
    /// Extra copy of the run report.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Default model for perplexity stages without a model_path.
    #[arg(long)]
    pub lm: Option<PathBuf>,
    /// Overrides the config's worker count.
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Reference model for perplexity features.
    #[arg(long)]
    pub lm: Option<PathBuf>,
    /// Language model as TAG=PATH; repeat for each language.
    #[arg(long = "lang", value_parser = parse_tagged)]
    pub languages: Vec<(String, PathBuf)>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[command(flatten)]
    pub models: ModelArgs,
    #[arg(long)]
    pub sample: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub bins: Option<usize>,
    /// Also write the JSON result here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Refined corpus or stats file to compare against --input.
    #[arg(long)]
    pub compare: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum LmCommand {
    /// Train a character n-gram model.
    Train(LmTrainArgs),
}

#[derive(Debug, Args)]
pub struct LmTrainArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub order: usize,
    #[arg(long, default_value_t = 0.1)]
    pub k: f64,
    #[arg(long, default_value_t = 2)]
    pub min_count: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DedupArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Kept documents as JSONL.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Duplicate clusters as JSON.
    #[arg(long)]
    pub clusters: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub ngram: usize,
    #[arg(long, default_value_t = 128)]
    pub num_perm: usize,
    #[arg(long, default_value_t = 16)]
    pub bands: usize,
    #[arg(long, default_value_t = 0.7)]
    pub threshold: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Subcommand)]
pub enum IndexCommand {
    /// Build an index directory from a corpus.
    Build(IndexBuildArgs),
}

#[derive(Debug, Args)]
pub struct IndexBuildArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = garden_core::retriever::DEFAULT_SHARDS)]
    pub shards: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1.2)]
    pub k1: f64,
    #[arg(long, default_value_t = 0.75)]
    pub b: f64,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[arg(long, conflicts_with = "input")]
    pub index: Option<PathBuf>,
    /// Index a corpus in memory instead of opening an index.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub query: String,
    #[arg(long, default_value_t = garden_server::DEFAULT_TOPK)]
    pub topk: usize,
}

#[derive(Debug, Subcommand)]
pub enum DebugCommand {
    /// Filter ratio of one filter across a grid of parameter values.
    Sweep(SweepArgs),
    /// Show where a cleaning rule would match, without changing anything.
    CleanPreview(PreviewArgs),
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub filter: String,
    #[arg(long)]
    pub param: String,
    #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
    pub values: Vec<f64>,
    #[arg(long, default_value_t = garden_core::analyzer::DEFAULT_SAMPLE)]
    pub sample: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Fixed filter parameter as NAME=JSON, e.g. words=["spam"].
    #[arg(long = "set", value_parser = parse_param)]
    pub params: Vec<(String, serde_json::Value)>,
    #[arg(long)]
    pub lm: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PreviewArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Whole rule as JSON; overrides the individual rule flags.
    #[arg(long, conflicts_with = "pattern")]
    pub rule: Option<String>,
    #[arg(long, value_parser = parse_scope, default_value = "line")]
    pub scope: Scope,
    #[arg(long, value_parser = parse_matcher, default_value = "exact")]
    pub matcher: MatcherKind,
    #[arg(long, required_unless_present = "rule")]
    pub pattern: Option<String>,
    #[arg(long, value_parser = parse_action, default_value = "remove")]
    pub action: Action,
    #[arg(long)]
    pub replace_with: Option<String>,
    #[arg(long, default_value_t = garden_core::analyzer::DEFAULT_SAMPLE)]
    pub sample: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = garden_core::analyzer::DEFAULT_MAX_CASES)]
    pub max_cases: usize,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub index: Option<PathBuf>,
    #[arg(long)]
    pub stats: Option<PathBuf>,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub models: ModelArgs,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: IpAddr,
    /// GARDEN_PORT takes precedence.
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
}

fn parse_tagged(s: &str) -> Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((tag, path)) if !tag.is_empty() && !path.is_empty() => Ok((tag.to_string(), PathBuf::from(path))),
        _ => Err(format!("expected TAG=PATH, got '{s}'")),
    }
}

fn parse_param(s: &str) -> Result<(String, serde_json::Value), String> {
    let (name, raw) = s.split_once('=').ok_or_else(|| format!("expected NAME=VALUE, got '{s}'"))?;
    // Bare words are taken as strings so `--set script=han` works unquoted.
    let value = serde_json::from_str(raw).unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
    Ok((name.to_string(), value))
}

fn parse_enum<T: serde::de::DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|_| format!("unknown value '{s}'"))
}

fn parse_scope(s: &str) -> Result<Scope, String> {
    parse_enum(s)
}

fn parse_matcher(s: &str) -> Result<MatcherKind, String> {
    parse_enum(s)
}

fn parse_action(s: &str) -> Result<Action, String> {
    parse_enum(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn value_parsers() {
        assert_eq!(parse_tagged("en=m/en.bin").unwrap(), ("en".into(), PathBuf::from("m/en.bin")));
        assert!(parse_tagged("en").is_err());
        assert_eq!(parse_param("max_hits=2").unwrap().1, serde_json::json!(2));
        assert_eq!(parse_param("script=han").unwrap().1, serde_json::json!("han"));
        assert_eq!(parse_scope("paragraph").unwrap(), Scope::Paragraph);
        assert!(parse_action("erase").is_err());
    }
}
