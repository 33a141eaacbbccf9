//! Async client for the wst-server HTTP API. Request and response bodies
//! are the server's own wire types.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::json;
use thiserror::Error;
use wst_core::config::RunConfig;
use wst_core::pipeline::{ConfusionStats, PipelineModel};
use wst_core::storage::{model_from_value, model_to_value};
use wst_core::workflow::{EvaluationReport, TrainSummary};
use wst_core::{SignalFrame, TimingReport};
use wst_server::{ClassifyRequest, ClassifyResponse, ErrorBody, FrameBody, Health, ScatterRequest, ScatterResponse};

#[derive(Debug, Error)]
pub enum ClientError {
    /// The service answered with an error body.
    #[error("{code}: {message} (HTTP {status})")]
    Api { status: u16, code: String, message: String },
    #[error("E_TRANSPORT: {0}")]
    Transport(#[from] reqwest::Error),
    #[error("E_SCHEMA: {0}")]
    Decode(String),
}

impl ClientError {
    pub fn code(&self) -> &str {
        match self {
            ClientError::Api { code, .. } => code,
            ClientError::Transport(_) => "E_TRANSPORT",
            ClientError::Decode(_) => "E_SCHEMA",
        }
    }
}

pub type Result<T> = std::result::Result<T, ClientError>;

#[derive(Debug, Clone)]
pub struct Client {
    base: String,
    http: reqwest::Client,
}

impl Client {
    /// `base` is the service root, e.g. `http://127.0.0.1:8080`.
    pub fn new(base: impl Into<String>) -> Self {
        Client {
            base: base.into().trim_end_matches('/').to_string(),
            http: reqwest::Client::new(),
        }
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    async fn send<T: DeserializeOwned>(&self, req: reqwest::RequestBuilder) -> Result<T> {
        let resp = req.send().await?;
        let status = resp.status();
        let bytes = resp.bytes().await?;
        if !status.is_success() {
            return Err(match serde_json::from_slice::<ErrorBody>(&bytes) {
                Ok(body) => ClientError::Api {
                    status: status.as_u16(),
                    code: body.code,
                    message: body.message,
                },
                Err(_) => ClientError::Api {
                    status: status.as_u16(),
                    code: "E_HTTP".into(),
                    message: String::from_utf8_lossy(&bytes).into_owned(),
                },
            });
        }
        serde_json::from_slice(&bytes).map_err(|e| ClientError::Decode(e.to_string()))
    }

    async fn post<B: Serialize, T: DeserializeOwned>(&self, path: &str, body: &B) -> Result<T> {
        self.send(self.http.post(format!("{}{path}", self.base)).json(body))
            .await
    }

    async fn get<T: DeserializeOwned>(&self, path: &str) -> Result<T> {
        self.send(self.http.get(format!("{}{path}", self.base))).await
    }

    pub async fn health(&self) -> Result<Health> {
        self.get("/healthz").await
    }

    pub async fn model(&self) -> Result<PipelineModel> {
        let value: serde_json::Value = self.get("/v1/model").await?;
        model_from_value(value).map_err(|e| ClientError::Decode(e.to_string()))
    }

    pub async fn put_model(&self, model: &PipelineModel) -> Result<TrainSummary> {
        let req = self
            .http
            .put(format!("{}/v1/model", self.base))
            .json(&model_to_value(model));
        self.send(req).await
    }

    pub async fn classify_frame(&self, frame: &SignalFrame) -> Result<ClassifyResponse> {
        let body = ClassifyRequest {
            frame: Some(FrameBody::from_frame(frame)),
            path: None,
        };
        self.post("/v1/classify", &body).await
    }

    /// Classifies a frame file on the server's filesystem.
    pub async fn classify_path(&self, path: &Path) -> Result<ClassifyResponse> {
        let body = ClassifyRequest {
            frame: None,
            path: Some(path.to_path_buf()),
        };
        self.post("/v1/classify", &body).await
    }

    pub async fn scatter(&self, frame: &SignalFrame) -> Result<ScatterResponse> {
        let body = ScatterRequest {
            filter_bank: None,
            frame: FrameBody::from_frame(frame),
        };
        self.post("/v1/scatter", &body).await
    }

    /// Trains on a server-side manifest and makes the result the active model.
    pub async fn train(&self, manifest: &Path, config: &RunConfig) -> Result<TrainSummary> {
        self.post("/v1/train", &json!({"manifest": manifest, "config": config}))
            .await
    }

    pub async fn evaluate(&self, manifest: &Path, config: &RunConfig) -> Result<EvaluationReport> {
        self.post("/v1/evaluate", &json!({"manifest": manifest, "config": config}))
            .await
    }

    pub async fn confusion_stats(&self, counts: &[Vec<u64>]) -> Result<ConfusionStats> {
        self.post("/v1/confusion-stats", &json!({ "counts": counts })).await
    }

    pub async fn timing(&self) -> Result<TimingReport> {
        self.get("/v1/timing").await
    }
}
