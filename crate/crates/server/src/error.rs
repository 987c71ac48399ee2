use std::collections::BTreeMap;

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use garden_core::analyzer::DebugError;
use garden_core::api::ErrorBody;
use garden_core::pipeline::{ConfigError, PipelineError};
use serde_json::Value;

#[derive(Debug, Clone)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    pub detail: BTreeMap<String, Value>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError { status, code, message: message.into(), detail: BTreeMap::new() }
    }

    pub fn bad_request(code: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, code, message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }

    pub fn with(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.detail.insert(key.into(), value.into());
        self
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody { code: self.code.into(), message: self.message, detail: self.detail };
        (self.status, Json(body)).into_response()
    }
}

impl From<ConfigError> for ApiError {
    fn from(e: ConfigError) -> Self {
        let base = ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_config", e.to_string());
        match e {
            ConfigError::Parse { line, column, .. } => base.with("line", line).with("column", column),
            ConfigError::Validation { stage, param, .. } => base.with("stage", stage).with("param", param),
        }
    }
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Config(c) => c.into(),
            PipelineError::Resource { stage, ref param, .. } => {
                let param = param.clone();
                ApiError::bad_request("missing_resource", e.to_string()).with("stage", stage).with("param", param)
            }
            other => ApiError::internal(other.to_string()),
        }
    }
}

impl From<DebugError> for ApiError {
    fn from(e: DebugError) -> Self {
        match e {
            DebugError::InvalidRequest(m) => ApiError::bad_request("invalid_request", m),
            DebugError::Clean(c) => ApiError::bad_request("invalid_rule", c.to_string()),
            DebugError::Pipeline(p) => {
                let mut err = ApiError::from(p);
                if err.code == "invalid_config" {
                    err.status = StatusCode::BAD_REQUEST;
                    err.code = "invalid_request";
                }
                err
            }
        }
    }
}
