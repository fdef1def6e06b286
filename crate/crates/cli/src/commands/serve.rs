//! `trellis serve` — the HTTP query service.
//!
//! Endpoints: `GET /healthz`, `POST /v1/query` (retrieval only), and
//! `POST /v1/ask` (full generation). Responses are JSON; malformed bodies
//! get a 400 with detail, and query endpoints return 503 until artifacts
//! are loaded.

use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;

use trellis_core::config::EngineConfig;
use trellis_core::engine::Engine;
use trellis_core::error::{Error, Result};

struct AppState {
    engine: Option<Engine>,
    load_error: Option<String>,
    default_k: usize,
}

fn error_response(status: StatusCode, detail: String) -> Response {
    (status, Json(json!({ "error": detail }))).into_response()
}

fn engine_error(e: &Error) -> Response {
    let status = if e.is_backend() {
        StatusCode::BAD_GATEWAY
    } else {
        StatusCode::UNPROCESSABLE_ENTITY
    };
    error_response(status, e.to_string())
}

async fn healthz(State(state): State<Arc<AppState>>) -> Response {
    let loaded = state.engine.is_some();
    let body = json!({
        "status": if loaded { "ok" } else { "degraded" },
        "versions": {
            "service": env!("CARGO_PKG_VERSION"),
            "artifact_format": 1,
        },
        "artifacts_loaded": loaded,
        "load_error": state.load_error,
    });
    (StatusCode::OK, Json(body)).into_response()
}

#[derive(Deserialize)]
struct QueryRequest {
    query: String,
    #[serde(default)]
    k: Option<usize>,
}

#[derive(Deserialize)]
struct AskRequest {
    query: String,
}

async fn query(
    State(state): State<Arc<AppState>>,
    payload: std::result::Result<Json<QueryRequest>, JsonRejection>,
) -> Response {
    let Json(request) = match payload {
        Ok(p) => p,
        Err(rejection) => {
            return error_response(StatusCode::BAD_REQUEST, rejection.body_text());
        }
    };
    if state.engine.is_none() {
        return error_response(
            StatusCode::SERVICE_UNAVAILABLE,
            "artifacts not loaded".into(),
        );
    }
    let k = request.k.unwrap_or(state.default_k);
    let state = Arc::clone(&state);
    let result = tokio::task::spawn_blocking(move || {
        state
            .engine
            .as_ref()
            .expect("engine checked above")
            .retrieve(&request.query, k)
    })
    .await
    .expect("retrieval task joins");
    match result {
        Ok(retrieval) => (
            StatusCode::OK,
            Json(json!({
                "evidence": retrieval.evidence,
                "warnings": retrieval.warnings,
                "timings_ms": retrieval.timings_ms,
            })),
        )
            .into_response(),
        Err(e) => engine_error(&e),
    }
}

async fn ask(
    State(state): State<Arc<AppState>>,
    payload: std::result::Result<Json<AskRequest>, JsonRejection>,
) -> Response {
    let Json(request) = match payload {
        Ok(p) => p,
        Err(rejection) => {
            return error_response(StatusCode::BAD_REQUEST, rejection.body_text());
        }
    };
    if state.engine.is_none() {
        return error_response(
            StatusCode::SERVICE_UNAVAILABLE,
            "artifacts not loaded".into(),
        );
    }
    let state = Arc::clone(&state);
    let result = tokio::task::spawn_blocking(move || {
        state
            .engine
            .as_ref()
            .expect("engine checked above")
            .answer(&request.query)
    })
    .await
    .expect("answer task joins");
    match result {
        Ok(answer) => (
            StatusCode::OK,
            Json(json!({
                "answer": answer.text,
                "evidence": answer.evidence,
                "timings": answer.timings_ms,
                "warnings": answer.warnings,
            })),
        )
            .into_response(),
        Err(e) => engine_error(&e),
    }
}

pub fn serve(config: EngineConfig, host: &str, port: u16) -> Result<()> {
    let default_k = config.fusion.top_n;
    let (engine, load_error) = match Engine::load(config) {
        Ok(engine) => (Some(engine), None),
        Err(e) => {
            eprintln!("artifacts not loaded: {e}");
            (None, Some(e.to_string()))
        }
    };
    let state = Arc::new(AppState {
        engine,
        load_error,
        default_k,
    });

    let app = Router::new()
        .route("/healthz", get(healthz))
        .route("/v1/query", post(query))
        .route("/v1/ask", post(ask))
        .with_state(state);

    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind((host, port)).await?;
        let addr = listener.local_addr()?;
        println!("listening on http://{addr}");
        use std::io::Write;
        std::io::stdout().flush()?;
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok::<(), std::io::Error>(())
    })?;
    Ok(())
}
