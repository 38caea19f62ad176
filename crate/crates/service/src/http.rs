//! JSON HTTP API over a run store.
//!
//! | method | path                   | body / reply                            |
//! |--------|------------------------|-----------------------------------------|
//! | GET    | `/runs`                | run summaries                           |
//! | GET    | `/runs/:id`            | config echo, counters                   |
//! | GET    | `/runs/:id/status`     | `queued`, `running`, `done` or `failed` |
//! | GET    | `/runs/:id/slice`      | `?axes=A,B&fix=NAME:VALUE,...`          |
//! | POST   | `/runs?kind=explore`   | run config in, `{id, status}` out       |

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use pexplore::interp::{extract_slice, FixedValue, InterpolatedField};
use pexplore::model::ModelRegistry;
use serde::Serialize;
use serde_json::json;
use tokio::sync::Semaphore;

use crate::config::RunConfig;
use crate::pipeline::{run_resolved, RunKind};
use crate::store::{CountersFile, RunRecord, RunStatus, RunStore, StoreError};

/// A finished run together with its interpolated field.
pub struct LoadedRun {
    pub record: RunRecord,
    pub field: InterpolatedField,
}

pub struct AppState {
    pub store: RunStore,
    pub registry: ModelRegistry,
    loaded: RwLock<HashMap<String, Arc<LoadedRun>>>,
    workers: Arc<Semaphore>,
}

impl AppState {
    pub fn new(store: RunStore, registry: ModelRegistry, workers: usize) -> Self {
        Self { store, registry, loaded: RwLock::default(), workers: Arc::new(Semaphore::new(workers.max(1))) }
    }

    /// Loads a finished run once and keeps it for later slice requests.
    /// Persisted runs are immutable, so the cache never goes stale.
    pub fn loaded(&self, id: &str) -> Result<Arc<LoadedRun>, ApiError> {
        if let Some(run) = self.loaded.read().expect("cache lock").get(id) {
            return Ok(Arc::clone(run));
        }
        let record = self.store.load(id)?;
        let field = InterpolatedField::new(&record.grid, &record.result)
            .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, format!("run {id} cannot be interpolated: {e}")))?;
        let run = Arc::new(LoadedRun { record, field });
        self.loaded.write().expect("cache lock").insert(id.to_string(), Arc::clone(&run));
        Ok(run)
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: serde_json::Value,
}

impl ApiError {
    pub fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self { status, body: json!({ "error": message.into() }) }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let status = match e {
            StoreError::NotFound(_) | StoreError::BadId(_) => StatusCode::NOT_FOUND,
            StoreError::NotFinished(_) => StatusCode::CONFLICT,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self::new(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

type Shared = Arc<AppState>;

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/runs", get(list_runs).post(launch_run))
        .route("/runs/:id", get(run_detail))
        .route("/runs/:id/status", get(run_status))
        .route("/runs/:id/slice", get(run_slice))
        .with_state(state)
}

pub async fn serve(addr: &str, state: Shared) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(state)).await
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
}

async fn list_runs(State(st): State<Shared>) -> Result<Response, ApiError> {
    let summaries = blocking(move || {
        let ids = st.store.ids()?;
        ids.iter().map(|id| st.store.summary(id).map_err(ApiError::from)).collect::<Result<Vec<_>, _>>()
    })
    .await?;
    Ok(Json(summaries).into_response())
}

#[derive(Serialize)]
struct Detail {
    id: String,
    status: RunStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    kind: RunKind,
    config: RunConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    counters: Option<CountersFile>,
}

async fn run_detail(State(st): State<Shared>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let detail = blocking(move || {
        let echo = st.store.config(&id)?;
        let status = st.store.status(&id)?;
        let counters = match st.store.counters(&id) {
            Ok(c) => Some(c),
            Err(StoreError::NotFinished(_)) => None,
            Err(e) => return Err(e.into()),
        };
        Ok(Detail { id, status: status.status, error: status.error, kind: echo.kind, config: echo.config, counters })
    })
    .await?;
    Ok(Json(detail).into_response())
}

async fn run_status(State(st): State<Shared>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let rec = blocking(move || Ok((st.store.status(&id)?, id))).await?;
    let (rec, id) = rec;
    Ok(Json(json!({ "id": id, "status": rec.status, "error": rec.error })).into_response())
}

/// Parsed `axes=A,B&fix=NAME:VALUE,...`; `fix` may also repeat.
fn parse_slice_query(pairs: &[(String, String)]) -> Result<([String; 2], Vec<FixedValue>), ApiError> {
    let mut axes = None;
    let mut fixed = Vec::new();
    for (k, v) in pairs {
        match k.as_str() {
            "axes" => {
                let names: Vec<&str> = v.split(',').map(str::trim).collect();
                match names.as_slice() {
                    [a, b] if !a.is_empty() && !b.is_empty() => axes = Some([a.to_string(), b.to_string()]),
                    _ => return Err(ApiError::bad_request(format!("axes must name two axes as A,B, got '{v}'"))),
                }
            }
            "fix" => {
                for item in v.split(',').filter(|s| !s.trim().is_empty()) {
                    let (name, value) = item
                        .split_once(':')
                        .ok_or_else(|| ApiError::bad_request(format!("fix expects NAME:VALUE, got '{item}'")))?;
                    let value: f64 = value
                        .trim()
                        .parse()
                        .map_err(|_| ApiError::bad_request(format!("fix value '{value}' for {name} is not a number")))?;
                    fixed.push(FixedValue { name: name.trim().to_string(), value });
                }
            }
            other => return Err(ApiError::bad_request(format!("unknown query parameter '{other}'"))),
        }
    }
    let axes = axes.ok_or_else(|| ApiError::bad_request("missing axes=A,B"))?;
    Ok((axes, fixed))
}

async fn run_slice(
    State(st): State<Shared>,
    Path(id): Path<String>,
    Query(pairs): Query<Vec<(String, String)>>,
) -> Result<Response, ApiError> {
    let (axes, fixed) = parse_slice_query(&pairs)?;
    let body = blocking(move || {
        let run = st.loaded(&id)?;
        let slice = extract_slice(&run.field, [&axes[0], &axes[1]], &fixed)
            .map_err(|e| ApiError::bad_request(e.to_string()))?;
        Ok(serde_json::to_vec(&slice).expect("serializable slice"))
    })
    .await?;
    Ok(([(header::CONTENT_TYPE, "application/json")], body).into_response())
}

fn parse_kind(pairs: &[(String, String)]) -> Result<RunKind, ApiError> {
    let mut kind = RunKind::Explore;
    for (k, v) in pairs {
        match (k.as_str(), v.as_str()) {
            ("kind", "explore") => kind = RunKind::Explore,
            ("kind", "full") => kind = RunKind::Full,
            ("kind", other) => return Err(ApiError::bad_request(format!("kind must be explore or full, got '{other}'"))),
            (other, _) => return Err(ApiError::bad_request(format!("unknown query parameter '{other}'"))),
        }
    }
    Ok(kind)
}

async fn launch_run(
    State(st): State<Shared>,
    Query(pairs): Query<Vec<(String, String)>>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let kind = parse_kind(&pairs)?;
    let text = std::str::from_utf8(&body).map_err(|_| ApiError::bad_request("body is not UTF-8"))?;
    let config = RunConfig::from_json(text).map_err(|e| ApiError::bad_request(e.to_string()))?;
    let resolved = config.resolve(&st.registry).map_err(|e| {
        let fields: Vec<_> = e.fields().iter().map(|f| json!({ "field": f.field, "reason": f.reason })).collect();
        ApiError { status: StatusCode::BAD_REQUEST, body: json!({ "error": e.to_string(), "fields": fields }) }
    })?;

    let id = {
        let (st, config) = (Arc::clone(&st), config.clone());
        blocking(move || Ok(st.store.create(kind, &config)?)).await?
    };

    let worker_id = id.clone();
    tokio::spawn(async move {
        let Ok(_permit) = Arc::clone(&st.workers).acquire_owned().await else { return };
        let _ = tokio::task::spawn_blocking(move || {
            let store = &st.store;
            if store.set_status(&worker_id, RunStatus::Running, None).is_err() {
                return;
            }
            let outcome = run_resolved(&config, resolved, kind)
                .map_err(|e| e.to_string())
                .and_then(|out| store.write_results(&worker_id, &out).map_err(|e| e.to_string()));
            if let Err(msg) = outcome {
                let _ = store.set_status(&worker_id, RunStatus::Failed, Some(msg));
            }
        })
        .await;
    });

    Ok((StatusCode::ACCEPTED, Json(json!({ "id": id, "status": RunStatus::Queued })) ).into_response())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs(q: &[(&str, &str)]) -> Vec<(String, String)> {
        q.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect()
    }

    #[test]
    fn slice_query_forms() {
        let (axes, fixed) = parse_slice_query(&pairs(&[("axes", "p3,p6"), ("fix", "p5:28000")])).unwrap();
        assert_eq!(axes, ["p3".to_string(), "p6".to_string()]);
        assert_eq!(fixed, vec![FixedValue { name: "p5".into(), value: 28000.0 }]);
        let (_, fixed) =
            parse_slice_query(&pairs(&[("axes", "a,b"), ("fix", "c:1,d:2"), ("fix", "e:3")])).unwrap();
        assert_eq!(fixed.len(), 3);
    }

    #[test]
    fn malformed_slice_queries() {
        for q in [
            vec![("fix", "p5:1")],
            vec![("axes", "p3")],
            vec![("axes", "p3,p6"), ("fix", "p5")],
            vec![("axes", "p3,p6"), ("fix", "p5:abc")],
            vec![("axes", "p3,p6"), ("zoom", "2")],
        ] {
            let e = parse_slice_query(&pairs(&q)).unwrap_err();
            assert_eq!(e.status, StatusCode::BAD_REQUEST);
        }
    }
}
