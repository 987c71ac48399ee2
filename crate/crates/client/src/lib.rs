//! Typed client for the garden HTTP service.
//!
//! ```no_run
//! # async fn demo() -> Result<(), garden_client::ClientError> {
//! let client = garden_client::Client::new("http://127.0.0.1:8080")?;
//! let hits = client.search("renmin university", 5).await?;
//! println!("{}", hits.hits.len());
//! # Ok(()) }
//! ```

use garden_core::analyzer::{CorpusStats, MatchCaseReport, PreviewRequest, SweepRequest, SweepResult};
use garden_core::api::{ConfigVersion, DiffResponse, ErrorBody, Health, RunRequest, RunStatus, SearchResponse};
use garden_core::pipeline::OperatorSpec;
use reqwest::{Method, RequestBuilder, StatusCode};
use serde::de::DeserializeOwned;
use serde::Serialize;

pub const SERVER_ENV: &str = "GARDEN_SERVER";

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("invalid server url '{0}'")]
    BadUrl(String),
    #[error("request failed: {0}")]
    Http(#[from] reqwest::Error),
    #[error("server error {status} ({}): {}", body.code, body.message)]
    Api { status: StatusCode, body: ErrorBody },
    #[error("unexpected response ({status}): {text}")]
    Unexpected { status: StatusCode, text: String },
}

impl ClientError {
    /// The service's error code, when the server produced one.
    pub fn code(&self) -> Option<&str> {
        match self {
            ClientError::Api { body, .. } => Some(&body.code),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct StatsParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bins: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct Client {
    base: String,
    http: reqwest::Client,
}

impl Client {
    pub fn new(base_url: &str) -> Result<Self, ClientError> {
        let base = base_url.trim_end_matches('/').to_string();
        if !(base.starts_with("http://") || base.starts_with("https://")) {
            return Err(ClientError::BadUrl(base_url.to_string()));
        }
        Ok(Client { base, http: reqwest::Client::new() })
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    fn request(&self, method: Method, path: &str) -> RequestBuilder {
        self.http.request(method, format!("{}{path}", self.base))
    }

    /// The raw JSON of a response, or the server's error body.
    pub async fn send_value(&self, req: RequestBuilder) -> Result<serde_json::Value, ClientError> {
        let resp = req.send().await?;
        let status = resp.status();
        let text = resp.text().await?;
        if status.is_success() {
            return serde_json::from_str(&text).map_err(|_| ClientError::Unexpected { status, text });
        }
        match serde_json::from_str::<ErrorBody>(&text) {
            Ok(body) => Err(ClientError::Api { status, body }),
            Err(_) => Err(ClientError::Unexpected { status, text }),
        }
    }

    async fn send<T: DeserializeOwned>(&self, req: RequestBuilder) -> Result<T, ClientError> {
        let v = self.send_value(req).await?;
        serde_json::from_value(v.clone())
            .map_err(|e| ClientError::Unexpected { status: StatusCode::OK, text: format!("{e}: {v}") })
    }

    pub async fn health(&self) -> Result<Health, ClientError> {
        self.send(self.request(Method::GET, "/api/health")).await
    }

    pub async fn stats(&self, params: &StatsParams) -> Result<CorpusStats, ClientError> {
        self.send(self.request(Method::GET, "/api/stats").query(params)).await
    }

    pub async fn stats_diff(&self, raw: &str, refined: &str) -> Result<DiffResponse, ClientError> {
        self.send(self.request(Method::GET, "/api/stats/diff").query(&[("raw", raw), ("refined", refined)])).await
    }

    pub async fn search(&self, query: &str, k: usize) -> Result<SearchResponse, ClientError> {
        self.send(self.request(Method::GET, "/api/search").query(&[("q", query), ("k", &k.to_string())])).await
    }

    pub async fn sweep(&self, req: &SweepRequest) -> Result<SweepResult, ClientError> {
        self.send(self.request(Method::POST, "/api/debug/sweep").json(req)).await
    }

    pub async fn clean_preview(&self, req: &PreviewRequest) -> Result<MatchCaseReport, ClientError> {
        self.send(self.request(Method::POST, "/api/debug/clean-preview").json(req)).await
    }

    pub async fn operators(&self) -> Result<Vec<OperatorSpec>, ClientError> {
        self.send(self.request(Method::GET, "/api/operators")).await
    }

    pub async fn config(&self) -> Result<ConfigVersion, ClientError> {
        self.send(self.request(Method::GET, "/api/config")).await
    }

    /// Save a new config version. The bytes are stored exactly as given.
    pub async fn put_config(&self, content: impl Into<Vec<u8>>) -> Result<ConfigVersion, ClientError> {
        self.send(self.request(Method::PUT, "/api/config").body(content.into())).await
    }

    pub async fn run_pipeline(&self, req: &RunRequest) -> Result<RunStatus, ClientError> {
        self.send(self.request(Method::POST, "/api/pipeline/run").json(req)).await
    }

    pub async fn run_status(&self, id: u64) -> Result<RunStatus, ClientError> {
        self.send(self.request(Method::GET, &format!("/api/pipeline/runs/{id}"))).await
    }
}
