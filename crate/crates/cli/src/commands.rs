use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{Context, Result};
use garden_client::{Client, StatsParams};
use garden_core::analyzer::{
    compute_stats, preview_clean, sweep_filter, PreviewRequest, StatsModels, StatsOptions, SweepRequest, DEFAULT_BINS,
};
use garden_core::api::{diff_paths, SearchResponse};
use garden_core::cleaners::RuleSpec;
use garden_core::corpus::{read_corpus, read_documents, write_jsonl, write_jsonl_file};
use garden_core::dedup::{dedup_corpus, DedupParams};
use garden_core::ngram::{NgramModel, TrainOptions};
use garden_core::pipeline::{load_config, process_path, Plan, ProcessError, Resources};
use garden_core::retriever::{build_index, Bm25Params, Index, DEFAULT_SHARDS};
use garden_core::Document;
use garden_server::{AppState, ServeOptions};
use serde::Serialize;
use serde_json::json;

use crate::args::*;
use crate::UsageError;

pub fn run(cli: Cli) -> Result<()> {
    let server = cli.server.as_deref();
    match cli.command {
        Command::Reformat(a) => reformat(a),
        Command::Process(a) => process(a),
        Command::Analyze(a) => analyze(a, server),
        Command::Lm(LmCommand::Train(a)) => lm_train(a),
        Command::Dedup(a) => dedup(a),
        Command::Index(IndexCommand::Build(a)) => index_build(a),
        Command::Search(a) => search(a, server),
        Command::Debug(DebugCommand::Sweep(a)) => sweep(a, server),
        Command::Debug(DebugCommand::CleanPreview(a)) => clean_preview(a, server),
        Command::Serve(a) => serve(a),
    }
}

fn emit<T: Serialize>(value: &T) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn emit_to<T: Serialize>(value: &T, file: Option<&Path>) -> Result<()> {
    if let Some(path) = file {
        let bytes = serde_json::to_vec_pretty(value)?;
        std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))?;
    }
    emit(value)
}

fn docs(path: &Path) -> Result<Vec<Document>> {
    read_documents(path).with_context(|| format!("reading corpus {}", path.display()))
}

fn load_model(path: &Path) -> Result<NgramModel> {
    let bytes = std::fs::read(path).with_context(|| format!("reading model {}", path.display()))?;
    NgramModel::from_bytes(&bytes).with_context(|| format!("loading model {}", path.display()))
}

fn load_languages(langs: &[(String, PathBuf)]) -> Result<Option<BTreeMap<String, NgramModel>>> {
    if langs.is_empty() {
        return Ok(None);
    }
    langs.iter().map(|(tag, p)| Ok((tag.clone(), load_model(p)?))).collect::<Result<_>>().map(Some)
}

/// The server to use when no local input was given.
fn remote(server: Option<&str>, missing: &str) -> Result<Client> {
    let url = server.ok_or_else(|| UsageError(format!("{missing}, or --server for a running service")))?;
    Ok(Client::new(url)?)
}

fn block_on<F: std::future::Future>(f: F) -> Result<F::Output> {
    let rt = tokio::runtime::Builder::new_current_thread().enable_all().build()?;
    Ok(rt.block_on(f))
}

fn reformat(a: ReformatArgs) -> Result<()> {
    let parsed = read_corpus(&a.input, a.format, a.strict).with_context(|| format!("reading {}", a.input.display()))?;
    let summary = json!({
        "records": parsed.record_count(),
        "documents": parsed.documents.len(),
        "errors": parsed.errors,
    });
    match &a.output {
        Some(path) => {
            write_jsonl_file(path, &parsed.documents).with_context(|| format!("writing {}", path.display()))?;
            emit(&summary)
        }
        None => {
            write_jsonl(std::io::stdout().lock(), &parsed.documents)?;
            eprintln!("{summary}");
            Ok(())
        }
    }
}

fn process(a: ProcessArgs) -> Result<()> {
    let bytes = std::fs::read(&a.config).with_context(|| format!("reading config {}", a.config.display()))?;
    let mut config = load_config(&bytes).with_context(|| format!("config {}", a.config.display()))?;
    if let Some(w) = a.workers {
        config.workers = w;
    }
    let mut res = Resources::new();
    if let Some(dir) = a.config.parent().filter(|d| !d.as_os_str().is_empty()) {
        res = res.with_base_dir(dir);
    }
    if let Some(lm) = &a.lm {
        res = res.with_default_lm(Arc::new(load_model(lm)?));
    }
    let plan = Plan::build(&config, &res).with_context(|| format!("config {}", a.config.display()))?;
    let out = match process_path(&plan, &a.input, &a.output) {
        Ok(out) => out,
        Err(ProcessError::Output { source, report }) => {
            // Keep the partial report visible even though the run failed.
            emit(&report)?;
            return Err(source).context(format!("writing output to {}", a.output.display()));
        }
        Err(e) => return Err(e.into()),
    };
    emit_to(&out.report, a.report.as_deref())
}

fn analyze(a: AnalyzeArgs, server: Option<&str>) -> Result<()> {
    let Some(input) = &a.input else {
        if a.compare.is_some() {
            return Err(UsageError("--compare needs --input".into()).into());
        }
        let client = remote(server, "analyze needs --input")?;
        let params = StatsParams { sample: a.sample, seed: a.seed, bins: a.bins };
        let stats = block_on(client.stats(&params))??;
        return emit_to(&stats, a.out.as_deref());
    };
    let lm = a.models.lm.as_deref().map(load_model).transpose()?;
    let languages = load_languages(&a.models.languages)?;
    let models = StatsModels { lm: lm.as_ref(), languages: languages.as_ref() };
    if let Some(refined) = &a.compare {
        if a.sample.is_some() || a.bins.is_some() {
            return Err(UsageError("--compare measures whole corpora; drop --sample and --bins".into()).into());
        }
        let diff = diff_paths(input, refined, models).map_err(anyhow::Error::msg)?;
        return emit_to(&diff, a.out.as_deref());
    }
    if a.bins == Some(0) || a.sample == Some(0) {
        return Err(UsageError("--bins and --sample must be >= 1".into()).into());
    }
    let opts = StatsOptions {
        bins: a.bins.unwrap_or(DEFAULT_BINS),
        sample: a.sample,
        seed: a.seed.unwrap_or(0),
        ..Default::default()
    };
    let stats = compute_stats(&docs(input)?, models, &opts);
    emit_to(&stats, a.out.as_deref())
}

fn lm_train(a: LmTrainArgs) -> Result<()> {
    let texts: Vec<String> = docs(&a.input)?.into_iter().map(|d| d.text).collect();
    let model = NgramModel::train(&texts, TrainOptions { order: a.order, k: a.k, min_count: a.min_count })?;
    std::fs::write(&a.out, model.to_bytes()).with_context(|| format!("writing {}", a.out.display()))?;
    emit(&model.info())
}

fn dedup(a: DedupArgs) -> Result<()> {
    let corpus = docs(&a.input)?;
    let params = DedupParams {
        ngram: a.ngram,
        num_perm: a.num_perm,
        bands: a.bands,
        threshold: a.threshold,
        seed: a.seed,
    };
    let outcome = dedup_corpus(&corpus, &params)?;
    if let Some(path) = &a.output {
        let kept: Vec<Document> = outcome.kept.iter().map(|&i| corpus[i].clone()).collect();
        write_jsonl_file(path, &kept).with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(path) = &a.clusters {
        std::fs::write(path, serde_json::to_vec_pretty(&outcome.clusters)?)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    emit(&outcome.report)
}

fn index_build(a: IndexBuildArgs) -> Result<()> {
    let index = build_index(&docs(&a.input)?, a.shards, Bm25Params { k1: a.k1, b: a.b })?;
    index.write(&a.out).with_context(|| format!("writing index to {}", a.out.display()))?;
    let m = &index.manifest;
    emit(&json!({
        "out": a.out,
        "num_docs": m.num_docs,
        "num_shards": m.num_shards,
        "total_tokens": m.total_tokens,
        "avgdl": m.avgdl,
        "terms": m.df.len(),
    }))
}

fn search(a: SearchArgs, server: Option<&str>) -> Result<()> {
    if a.topk == 0 {
        return Err(UsageError("--topk must be >= 1".into()).into());
    }
    let index = match (&a.index, &a.input) {
        (Some(dir), _) => Index::open(dir).with_context(|| format!("opening index {}", dir.display()))?,
        (None, Some(input)) => build_index(&docs(input)?, DEFAULT_SHARDS, Bm25Params::default())?,
        (None, None) => {
            let client = remote(server, "search needs --index or --input")?;
            return emit(&block_on(client.search(&a.query, a.topk))??);
        }
    };
    let hits = index.search(&a.query, a.topk);
    emit(&SearchResponse { query: a.query, k: a.topk, hits })
}

fn sweep(a: SweepArgs, server: Option<&str>) -> Result<()> {
    let req = SweepRequest {
        filter: a.filter,
        param: a.param,
        values: a.values,
        sample: a.sample,
        seed: a.seed,
        params: a.params.into_iter().collect(),
    };
    let Some(input) = &a.input else {
        let client = remote(server, "debug sweep needs --input")?;
        return emit(&block_on(client.sweep(&req))??);
    };
    let mut res = Resources::new();
    if let Some(lm) = &a.lm {
        res = res.with_default_lm(Arc::new(load_model(lm)?));
    }
    emit(&sweep_filter(&docs(input)?, &req, &res)?)
}

fn clean_preview(a: PreviewArgs, server: Option<&str>) -> Result<()> {
    let rule = match &a.rule {
        Some(raw) => serde_json::from_str(raw).map_err(|e| UsageError(format!("--rule is not a valid rule: {e}")))?,
        None => RuleSpec {
            scope: a.scope,
            matcher: a.matcher,
            pattern: a.pattern.clone().unwrap_or_default(),
            action: a.action,
            replace_with: a.replace_with.clone(),
            fixpoint: false,
        },
    };
    let req = PreviewRequest { rule, sample: a.sample, seed: a.seed, max_cases: a.max_cases };
    let Some(input) = &a.input else {
        let client = remote(server, "debug clean-preview needs --input")?;
        return emit(&block_on(client.clean_preview(&req))??);
    };
    emit(&preview_clean(&docs(input)?, &req)?)
}

fn serve(a: ServeArgs) -> Result<()> {
    if a.index.is_none() && a.corpus.is_none() {
        return Err(UsageError("serve needs --index or --corpus".into()).into());
    }
    let opts = ServeOptions {
        index: a.index,
        stats: a.stats,
        corpus: a.corpus,
        config: a.config,
        lm: a.models.lm,
        languages: a.models.languages,
        host: a.host,
        port: a.port,
    };
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(async move {
        let state = Arc::new(AppState::load(&opts)?);
        let listener = garden_server::bind(&opts).await?;
        let addr = listener.local_addr()?;
        // One compact line, so wrappers can read the bound address.
        println!("{}", json!({"status": "listening", "addr": addr.to_string()}));
        garden_server::serve_on(listener, state, garden_server::shutdown_signal()).await?;
        Ok(())
    })
}
