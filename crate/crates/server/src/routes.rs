use std::path::{Path as FsPath, PathBuf};
use std::sync::atomic::Ordering;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use garden_core::analyzer::{
    compute_stats, preview_clean, sweep_filter, CorpusStats, MatchCaseReport, PreviewRequest, StatsOptions,
    SweepRequest, SweepResult,
};
use garden_core::api::{diff_paths, ConfigVersion, DiffResponse, Health, RunRequest, RunState, RunStatus, SearchResponse};
use garden_core::pipeline::{list_operators, load_config, process_path, OperatorSpec, Plan};
use garden_core::Document;
use serde::Deserialize;

use crate::error::ApiError;
use crate::state::{versioned_path, AppState};

type Shared = State<Arc<AppState>>;
type ApiResult<T> = Result<Json<T>, ApiError>;

pub fn routes() -> Router<Arc<AppState>> {
    Router::new()
        .route("/api/health", get(health))
        .route("/api/stats", get(stats))
        .route("/api/stats/diff", get(stats_diff))
        .route("/api/search", get(search))
        .route("/api/debug/sweep", post(sweep))
        .route("/api/debug/clean-preview", post(clean_preview))
        .route("/api/operators", get(operators))
        .route("/api/config", get(get_config).put(put_config))
        .route("/api/pipeline/run", post(run_pipeline))
        .route("/api/pipeline/runs/{id}", get(get_run))
        .fallback(not_found)
}

fn json_body<T>(body: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    body.map(|Json(t)| t).map_err(|e| ApiError::bad_request("bad_json", e.body_text()))
}

fn query<T>(q: Result<Query<T>, QueryRejection>) -> Result<T, ApiError> {
    q.map(|Query(t)| t).map_err(|e| ApiError::bad_request("bad_query", e.body_text()))
}

/// Run CPU-bound work off the async workers.
async fn blocking<T, F>(f: F) -> Result<T, ApiError>
where
    F: FnOnce() -> Result<T, ApiError> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError::internal(e.to_string()))?
}

fn corpus(state: &AppState) -> Result<(), ApiError> {
    match state.artifacts.corpus {
        Some(_) => Ok(()),
        None => Err(ApiError::new(StatusCode::CONFLICT, "no_corpus", "the server was started without a corpus")),
    }
}

fn docs(state: &AppState) -> &[Document] {
    state.artifacts.corpus.as_deref().unwrap_or_default()
}

async fn health() -> Json<Health> {
    Json(Health { status: "ok".into() })
}

async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint")
}

#[derive(Debug, Deserialize)]
struct StatsQuery {
    sample: Option<usize>,
    seed: Option<u64>,
    bins: Option<usize>,
}

async fn stats(State(state): Shared, q: Result<Query<StatsQuery>, QueryRejection>) -> ApiResult<CorpusStats> {
    let q = query(q)?;
    if q.sample.is_none() && q.seed.is_none() && q.bins.is_none() {
        return match &state.artifacts.stats {
            Some(s) => Ok(Json(s.clone())),
            None => Err(ApiError::new(StatusCode::NOT_FOUND, "no_stats", "no stats loaded and no corpus to compute them")),
        };
    }
    corpus(&state)?;
    if q.bins == Some(0) || q.sample == Some(0) {
        return Err(ApiError::bad_request("invalid_request", "bins and sample must be >= 1"));
    }
    blocking(move || {
        let opts = StatsOptions {
            bins: q.bins.unwrap_or(garden_core::analyzer::DEFAULT_BINS),
            sample: q.sample,
            seed: q.seed.unwrap_or(0),
            ..Default::default()
        };
        Ok(Json(compute_stats(docs(&state), state.artifacts.models(), &opts)))
    })
    .await
}

#[derive(Debug, Deserialize)]
struct DiffQuery {
    raw: String,
    refined: String,
}

async fn stats_diff(State(state): Shared, q: Result<Query<DiffQuery>, QueryRejection>) -> ApiResult<DiffResponse> {
    let q = query(q)?;
    blocking(move || {
        diff_paths(FsPath::new(&q.raw), FsPath::new(&q.refined), state.artifacts.models())
            .map(Json)
            .map_err(|e| ApiError::bad_request("invalid_request", e))
    })
    .await
}

#[derive(Debug, Deserialize)]
struct SearchQuery {
    q: String,
    k: Option<usize>,
}

pub const DEFAULT_TOPK: usize = 10;

async fn search(State(state): Shared, q: Result<Query<SearchQuery>, QueryRejection>) -> ApiResult<SearchResponse> {
    let q = query(q)?;
    let k = q.k.unwrap_or(DEFAULT_TOPK);
    if k == 0 {
        return Err(ApiError::bad_request("invalid_request", "k must be >= 1"));
    }
    blocking(move || {
        let hits = state.artifacts.index.search(&q.q, k);
        Ok(Json(SearchResponse { query: q.q, k, hits }))
    })
    .await
}

async fn sweep(State(state): Shared, body: Result<Json<SweepRequest>, JsonRejection>) -> ApiResult<SweepResult> {
    let req = json_body(body)?;
    corpus(&state)?;
    blocking(move || Ok(Json(sweep_filter(docs(&state), &req, &state.artifacts.resources)?))).await
}

async fn clean_preview(
    State(state): Shared,
    body: Result<Json<PreviewRequest>, JsonRejection>,
) -> ApiResult<MatchCaseReport> {
    let req = json_body(body)?;
    corpus(&state)?;
    blocking(move || Ok(Json(preview_clean(docs(&state), &req)?))).await
}

async fn operators() -> Json<Vec<OperatorSpec>> {
    Json(list_operators())
}

async fn get_config(State(state): Shared) -> Json<ConfigVersion> {
    Json(state.config.lock().unwrap().current.clone())
}

async fn put_config(State(state): Shared, body: Bytes) -> ApiResult<ConfigVersion> {
    load_config(&body)?;
    let content = String::from_utf8(body.to_vec()).map_err(|_| ApiError::bad_request("invalid_config", "config is not UTF-8"))?;
    let (path, version) = {
        let store = state.config.lock().unwrap();
        let path = store.path.clone().ok_or_else(|| {
            ApiError::new(StatusCode::CONFLICT, "no_config_path", "the server was started without --config")
        })?;
        (path, store.current.version + 1)
    };
    let target = versioned_path(&path, version);
    tokio::fs::write(&target, content.as_bytes()).await.map_err(|e| ApiError::internal(e.to_string()))?;
    let mut store = state.config.lock().unwrap();
    // A concurrent save may have won; never step backwards.
    if store.current.version < version {
        store.current = ConfigVersion { version, path: Some(target.display().to_string()), content };
    }
    Ok(Json(store.current.clone()))
}

async fn run_pipeline(
    State(state): Shared,
    body: Result<Json<RunRequest>, JsonRejection>,
) -> Result<(StatusCode, Json<RunStatus>), ApiError> {
    let req = json_body(body)?;
    let guard = state
        .run_lock
        .clone()
        .try_lock_owned()
        .map_err(|_| ApiError::new(StatusCode::CONFLICT, "run_in_progress", "a pipeline run is already in progress"))?;

    let (bytes, base_dir) = match &req.config_path {
        Some(p) => {
            let bytes = tokio::fs::read(p)
                .await
                .map_err(|e| ApiError::bad_request("invalid_request", format!("cannot read {p}: {e}")))?;
            (bytes, FsPath::new(p).parent().map(FsPath::to_path_buf))
        }
        None => {
            let store = state.config.lock().unwrap();
            let base = store.path.as_ref().and_then(|p| p.parent().map(FsPath::to_path_buf));
            (store.current.content.clone().into_bytes(), base)
        }
    };
    let config = load_config(&bytes)?;
    let mut res = state.artifacts.resources.clone();
    if let Some(dir) = base_dir.filter(|d| !d.as_os_str().is_empty()) {
        res = res.with_base_dir(dir);
    }
    let plan = Plan::build(&config, &res)?;

    let id = state.next_run.fetch_add(1, Ordering::SeqCst);
    let status = RunStatus {
        id,
        state: RunState::Running,
        input: req.input.clone(),
        output: req.output.clone(),
        report: None,
        error: None,
    };
    state.runs.lock().unwrap().insert(id, status.clone());
    let st = state.clone();
    tokio::task::spawn_blocking(move || {
        let result = process_path(&plan, &PathBuf::from(&req.input), &PathBuf::from(&req.output));
        let mut runs = st.runs.lock().unwrap();
        let entry = runs.get_mut(&id).expect("run registered");
        match result {
            Ok(out) => {
                entry.state = RunState::Succeeded;
                entry.report = Some(out.report);
            }
            Err(e) => {
                entry.state = RunState::Failed;
                entry.error = Some(e.to_string());
                if let garden_core::pipeline::ProcessError::Output { report, .. } = e {
                    entry.report = Some(*report);
                }
            }
        }
        drop(guard);
    });
    Ok((StatusCode::ACCEPTED, Json(status)))
}

async fn get_run(State(state): Shared, Path(id): Path<u64>) -> ApiResult<RunStatus> {
    state
        .runs
        .lock()
        .unwrap()
        .get(&id)
        .cloned()
        .map(Json)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "run_not_found", format!("no run with id {id}")))
}
