use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Deserialize;

use envkb::api::{self, ApiError, CycleRequest, QueryRequest};
use envkb::rag::{CycleConfig, LlmEndpoint};
use envkb::store::{EntityRecord, SharedStore};

/// Everything a handler needs. Cheap to clone.
#[derive(Clone)]
pub struct AppState {
    pub store: Arc<SharedStore>,
    pub llm: Arc<dyn LlmEndpoint>,
    pub cycle: CycleConfig,
}

struct Failure(ApiError);

impl From<ApiError> for Failure {
    fn from(e: ApiError) -> Self {
        Failure(e)
    }
}

impl IntoResponse for Failure {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.0.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self.0)).into_response()
    }
}

type Reply = Result<Response, Failure>;

fn body<T: DeserializeOwned>(bytes: &Bytes) -> Result<T, Failure> {
    serde_json::from_slice(bytes).map_err(|e| Failure(ApiError::bad(format!("invalid JSON body: {e}"))))
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    Many(Vec<EntityRecord>),
    One(Box<EntityRecord>),
}

async fn health(State(st): State<AppState>) -> Reply {
    Ok(Json(api::health(&st.store.snapshot())).into_response())
}

async fn records(State(st): State<AppState>, bytes: Bytes) -> Reply {
    let recs = match body::<OneOrMany>(&bytes)? {
        OneOrMany::Many(v) => v,
        OneOrMany::One(r) => vec![*r],
    };
    let out = api::insert_records(&st.store, recs)?;
    Ok((StatusCode::CREATED, Json(out)).into_response())
}

async fn query(State(st): State<AppState>, bytes: Bytes) -> Reply {
    let req: QueryRequest = body(&bytes)?;
    let out = api::run_query(&st.store.snapshot(), &req)?;
    Ok(Json(out).into_response())
}

async fn cycle(State(st): State<AppState>, bytes: Bytes) -> Reply {
    let req: CycleRequest = body(&bytes)?;
    let snap = st.store.snapshot();
    let out = tokio::task::spawn_blocking(move || api::run_cycle(&snap, st.llm.as_ref(), &st.cycle, &req))
        .await
        .map_err(|e| Failure(ApiError::Internal { message: e.to_string() }))??;
    Ok(Json(out).into_response())
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/records", post(records))
        .route("/query", post(query))
        .route("/cycle", post(cycle))
        .with_state(state)
}

/// Bind and serve until ctrl-c. Reports the bound address through
/// `on_bound` before accepting connections (useful with port 0).
pub async fn serve(state: AppState, addr: SocketAddr, on_bound: impl FnOnce(SocketAddr)) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    on_bound(listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
