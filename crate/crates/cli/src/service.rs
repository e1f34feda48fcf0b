//! HTTP retrieval and answer service over one immutable loaded index.

use std::sync::Arc;
use std::time::Duration;

use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use ragatr_core::rag::{answer_pipeline, Generator, Task, VqaQuestion, DEFAULT_K};
use ragatr_core::{Index, MetadataFilter, SpecTable};
use serde::Deserialize;
use serde_json::json;
use tokio::sync::Semaphore;

use crate::retrieve::{query_vector, retrieve, QueryError, QuerySource};

/// Upper bound on concurrent answer pipelines.
pub const ANSWER_CONCURRENCY: usize = 4;
/// How long in-flight requests may run after a shutdown signal.
pub const DRAIN_DEADLINE: Duration = Duration::from_secs(10);

pub struct AppState {
    pub index: Arc<Index>,
    /// Present when answers are enabled.
    pub answering: Option<(Arc<SpecTable>, Arc<dyn Generator>)>,
    pub permits: Semaphore,
}

impl AppState {
    pub fn new(index: Index, answering: Option<(Arc<SpecTable>, Arc<dyn Generator>)>) -> Arc<Self> {
        Arc::new(Self {
            index: Arc::new(index),
            answering,
            permits: Semaphore::new(ANSWER_CONCURRENCY),
        })
    }
}

pub struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

impl From<QueryError> for ApiError {
    fn from(e: QueryError) -> Self {
        let status = match e {
            QueryError::UnknownId(_) => StatusCode::NOT_FOUND,
            QueryError::Invalid(_) => StatusCode::BAD_REQUEST,
        };
        ApiError(status, e.to_string())
    }
}

/// A filter given as clause objects or as the CLI's comma-separated text.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum FilterInput {
    Text(String),
    Clauses(MetadataFilter),
}

impl FilterInput {
    fn resolve(self) -> Result<MetadataFilter, ApiError> {
        match self {
            FilterInput::Text(t) if t.trim().is_empty() => Ok(MetadataFilter::all()),
            FilterInput::Text(t) => t
                .parse()
                .map_err(|e| ApiError(StatusCode::BAD_REQUEST, format!("filter: {e}"))),
            FilterInput::Clauses(f) => f
                .validate()
                .map(|_| f)
                .map_err(|e| ApiError(StatusCode::BAD_REQUEST, format!("filter: {e}"))),
        }
    }
}

#[derive(Debug, Deserialize)]
pub struct QueryBody {
    pub vec: Option<Vec<f32>>,
    pub id: Option<String>,
    pub k: Option<usize>,
    pub filter: Option<FilterInput>,
    pub task: Option<Task>,
}

impl QueryBody {
    fn parts(self) -> Result<(QuerySource, usize, MetadataFilter, Option<Task>), ApiError> {
        let source = match (self.vec, self.id) {
            (Some(v), None) => QuerySource::Vector(v),
            (None, Some(id)) => QuerySource::RecordId(id),
            _ => {
                return Err(ApiError(
                    StatusCode::BAD_REQUEST,
                    "exactly one of `vec` or `id` is required".into(),
                ))
            }
        };
        let filter = self.filter.map_or(Ok(MetadataFilter::all()), FilterInput::resolve)?;
        Ok((source, self.k.unwrap_or(DEFAULT_K), filter, self.task))
    }
}

async fn healthz(State(s): State<Arc<AppState>>) -> Json<serde_json::Value> {
    Json(json!({ "status": "ok", "records": s.index.len(), "dim": s.index.dim() }))
}

async fn stats(State(s): State<Arc<AppState>>) -> Json<serde_json::Value> {
    Json(json!({
        "records": s.index.len(),
        "dim": s.index.dim(),
        "class_histogram": s.index.class_histogram(),
    }))
}

async fn retrieve_handler(
    State(s): State<Arc<AppState>>,
    Json(body): Json<QueryBody>,
) -> Result<Json<serde_json::Value>, ApiError> {
    let (source, k, filter, _) = body.parts()?;
    let hits = retrieve(&s.index, &source, k, &filter)?;
    Ok(Json(json!({ "hits": hits })))
}

async fn answer_handler(
    State(s): State<Arc<AppState>>,
    Json(body): Json<QueryBody>,
) -> Result<Response, ApiError> {
    let Some((specs, generator)) = s.answering.clone() else {
        return Err(ApiError(
            StatusCode::SERVICE_UNAVAILABLE,
            "answers are disabled: the service was started without a spec table".into(),
        ));
    };
    let (source, k, filter, task) = body.parts()?;
    let task = task.ok_or_else(|| ApiError(StatusCode::BAD_REQUEST, "`task` is required".into()))?;
    let query_id = match &source {
        QuerySource::RecordId(id) => id.clone(),
        QuerySource::Vector(_) => "inline".to_string(),
    };
    let embedding = query_vector(&s.index, &source)?;
    let _permit = s
        .permits
        .acquire()
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    let index = s.index.clone();
    let answer = tokio::task::spawn_blocking(move || {
        let q = VqaQuestion {
            query_id,
            query_embedding: embedding,
            task,
            k,
            filter,
        };
        answer_pipeline(&index, &q, generator.as_ref(), &specs)
    })
    .await
    .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    match answer {
        Ok(a) => Ok(Json(a).into_response()),
        Err(e) => {
            let status = match e.stage() {
                "generate" => StatusCode::BAD_GATEWAY,
                _ => StatusCode::BAD_REQUEST,
            };
            Err(ApiError(status, format!("[{}] {e}", e.stage())))
        }
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/v1/stats", get(stats))
        .route("/v1/retrieve", post(retrieve_handler))
        .route("/v1/answer", post(answer_handler))
        .with_state(state)
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = term => {},
    }
}

/// Serves until SIGINT/SIGTERM, then drains in-flight requests for at most
/// [`DRAIN_DEADLINE`].
pub async fn serve(listener: tokio::net::TcpListener, state: Arc<AppState>) -> std::io::Result<()> {
    let (tx, mut rx) = tokio::sync::watch::channel(false);
    let server = axum::serve(listener, router(state)).with_graceful_shutdown(async move {
        shutdown_signal().await;
        tracing::info!("shutdown requested; draining");
        let _ = tx.send(true);
    });
    let deadline = async move {
        let _ = rx.wait_for(|stopping| *stopping).await;
        tokio::time::sleep(DRAIN_DEADLINE).await;
    };
    tokio::select! {
        r = async move { server.await } => r,
        _ = deadline => {
            tracing::warn!("drain deadline passed; dropping remaining requests");
            Ok(())
        }
    }
}
