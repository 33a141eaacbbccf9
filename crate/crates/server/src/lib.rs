//! HTTP/JSON front end for the wst-core pipeline.
//!
//! All numeric work runs on the blocking pool; handlers only move JSON.
//! Manifest and frame paths in requests are resolved on the server's
//! filesystem.

use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};

use axum::extract::{DefaultBodyLimit, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use wst_core::config::RunConfig;
use wst_core::pipeline::{confusion_stats, ConfusionMatrix, ConfusionStats, Decision, PipelineModel};
use wst_core::storage::{model_from_value, model_to_value};
use wst_core::timing::FrameTiming;
use wst_core::workflow::{self, EvaluationReport, TrainSummary};
use wst_core::{Error, FilterBankConfig, ScatteringTransform, SignalFrame, TimingReport};

/// Largest request body accepted (an mm400 frame is ~8 MB of JSON).
pub const BODY_LIMIT: usize = 64 << 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

#[derive(Debug)]
pub enum ApiError {
    Core(Error),
    NoModel,
    BadRequest(String),
    Internal(String),
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError::Core(e)
    }
}

impl ApiError {
    fn parts(&self) -> (StatusCode, &str, String) {
        match self {
            ApiError::Core(e) => {
                let status = match e {
                    Error::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => StatusCode::NOT_FOUND,
                    Error::Io { .. } => StatusCode::INTERNAL_SERVER_ERROR,
                    Error::Config(_) | Error::Schema(_) => StatusCode::BAD_REQUEST,
                    _ => StatusCode::UNPROCESSABLE_ENTITY,
                };
                (status, e.code(), e.to_string())
            }
            ApiError::NoModel => (StatusCode::CONFLICT, "E_NO_MODEL", "no model is loaded".into()),
            ApiError::BadRequest(m) => (StatusCode::BAD_REQUEST, "E_BAD_REQUEST", m.clone()),
            ApiError::Internal(m) => (StatusCode::INTERNAL_SERVER_ERROR, "E_INTERNAL", m.clone()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, code, message) = self.parts();
        let body = ErrorBody {
            code: code.to_string(),
            message,
        };
        (status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

struct Loaded {
    model: PipelineModel,
    transform: ScatteringTransform,
}

#[derive(Default)]
struct Inner {
    loaded: RwLock<Option<Arc<Loaded>>>,
    timing: Mutex<TimingReport>,
}

/// Shared service state: the active model and latency history.
#[derive(Clone, Default)]
pub struct AppState {
    inner: Arc<Inner>,
}

impl AppState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Installs `model`, building the filter bank it was trained with.
    pub fn install(&self, model: PipelineModel) -> Result<(), Error> {
        let transform = workflow::transform_for(&model.filter_config)?;
        let loaded = Arc::new(Loaded { model, transform });
        *self.inner.loaded.write().expect("model lock") = Some(loaded);
        self.inner.timing.lock().expect("timing lock").iterations.clear();
        Ok(())
    }

    fn current(&self) -> Result<Arc<Loaded>, ApiError> {
        self.inner
            .loaded
            .read()
            .expect("model lock")
            .clone()
            .ok_or(ApiError::NoModel)
    }
}

async fn blocking<T, F>(f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce() -> Result<T, ApiError> + Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::Internal(format!("worker failed: {e}")))?
}

/// Wire form of a frame; validated on receipt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameBody {
    pub channels: usize,
    pub samples: usize,
    #[serde(default)]
    pub profile_id: String,
    pub data: Vec<f64>,
}

impl FrameBody {
    pub fn from_frame(frame: &SignalFrame) -> Self {
        FrameBody {
            channels: frame.channels,
            samples: frame.samples,
            profile_id: frame.profile_id.clone(),
            data: frame.data().to_vec(),
        }
    }

    pub fn into_frame(self) -> Result<SignalFrame, Error> {
        SignalFrame::new(self.channels, self.samples, self.profile_id, self.data)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub model_loaded: bool,
    pub version: String,
}

/// Either an inline frame or a path to a frame file.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ClassifyRequest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame: Option<FrameBody>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyResponse {
    pub decision: Decision,
    pub timing: FrameTiming,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterRequest {
    /// Defaults to the standard bank for the frame length.
    #[serde(default)]
    pub filter_bank: Option<FilterBankConfig>,
    pub frame: FrameBody,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterResponse {
    pub paths: usize,
    pub output_len: usize,
    pub features: Vec<f64>,
}

/// Manifest path plus an optional run configuration (defaults otherwise).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRequest {
    pub manifest: PathBuf,
    #[serde(default)]
    pub config: Option<RunConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionRequest {
    pub counts: Vec<Vec<u64>>,
    #[serde(default)]
    pub class_names: Option<Vec<String>>,
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/healthz", get(health))
        .route("/v1/model", get(get_model).put(put_model))
        .route("/v1/classify", post(classify))
        .route("/v1/scatter", post(scatter))
        .route("/v1/train", post(train))
        .route("/v1/evaluate", post(evaluate))
        .route("/v1/confusion-stats", post(confusion))
        .route("/v1/timing", get(timing))
        .layer(DefaultBodyLimit::max(BODY_LIMIT))
        .with_state(state)
}

/// Serves until ctrl-c.
pub async fn serve(listener: tokio::net::TcpListener, state: AppState) -> std::io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

async fn health(State(state): State<AppState>) -> Json<Health> {
    Json(Health {
        status: "ok".into(),
        model_loaded: state.current().is_ok(),
        version: env!("CARGO_PKG_VERSION").into(),
    })
}

async fn get_model(State(state): State<AppState>) -> ApiResult<serde_json::Value> {
    let loaded = state.current()?;
    blocking(move || Ok(model_to_value(&loaded.model))).await.map(Json)
}

async fn put_model(State(state): State<AppState>, Json(body): Json<serde_json::Value>) -> ApiResult<TrainSummary> {
    blocking(move || {
        let model = model_from_value(body)?;
        let summary = TrainSummary::for_model(&model, 0);
        state.install(model)?;
        Ok(summary)
    })
    .await
    .map(Json)
}

async fn classify(State(state): State<AppState>, Json(req): Json<ClassifyRequest>) -> ApiResult<ClassifyResponse> {
    let loaded = state.current()?;
    let (decision, timing) = blocking(move || match (req.frame, req.path) {
        (Some(frame), None) => {
            let frame = frame.into_frame()?;
            Ok(loaded.model.classify_frame(&frame, &loaded.transform)?)
        }
        (None, Some(path)) => Ok(workflow::classify_path(&loaded.model, &loaded.transform, &path)?),
        _ => Err(ApiError::BadRequest("give exactly one of `frame` or `path`".into())),
    })
    .await?;
    state.inner.timing.lock().expect("timing lock").push(timing);
    Ok(Json(ClassifyResponse { decision, timing }))
}

async fn scatter(Json(req): Json<ScatterRequest>) -> ApiResult<ScatterResponse> {
    blocking(move || {
        let frame = req.frame.into_frame()?;
        let filter = match req.filter_bank {
            Some(f) => f,
            None => FilterBankConfig::default_for(frame.samples.next_power_of_two().max(16))?,
        };
        let transform = workflow::transform_for(&filter)?;
        let features = transform.scatter_frame(&frame)?;
        Ok(ScatterResponse {
            paths: transform.paths().len(),
            output_len: filter.output_len(),
            features,
        })
    })
    .await
    .map(Json)
}

async fn train(State(state): State<AppState>, Json(req): Json<DatasetRequest>) -> ApiResult<TrainSummary> {
    blocking(move || {
        let cfg = req.config.unwrap_or_default();
        let (model, summary) = workflow::train(&cfg, &req.manifest)?;
        state.install(model)?;
        Ok(summary)
    })
    .await
    .map(Json)
}

async fn evaluate(Json(req): Json<DatasetRequest>) -> ApiResult<EvaluationReport> {
    blocking(move || {
        let cfg = req.config.unwrap_or_default();
        Ok(workflow::evaluate(&cfg, &req.manifest)?)
    })
    .await
    .map(Json)
}

async fn confusion(Json(req): Json<ConfusionRequest>) -> ApiResult<ConfusionStats> {
    let c = req.counts.len();
    if req.counts.iter().any(|r| r.len() != c) {
        return Err(ApiError::BadRequest("confusion counts must be square".into()));
    }
    let names = req
        .class_names
        .unwrap_or_else(|| (0..c).map(|k| k.to_string()).collect());
    if names.len() != c {
        return Err(ApiError::BadRequest(format!(
            "{} class names for {c} rows",
            names.len()
        )));
    }
    let mut cm = ConfusionMatrix::new(names);
    cm.counts = req.counts;
    Ok(Json(confusion_stats(&cm)?))
}

async fn timing(State(state): State<AppState>) -> Json<TimingReport> {
    Json(state.inner.timing.lock().expect("timing lock").clone())
}
