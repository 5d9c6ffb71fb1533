//! HTTP session API.
//!
//! Each session holds an immutable editor snapshot. Actions on one session
//! are serialized through its queue; reads clone the current snapshot and
//! never wait on an edit in progress.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use axum::body::{Body, Bytes};
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use polymodal_core::audio::{find_order, ScheduleOptions};
use polymodal_core::editor::{apply_edit, EditAction, EditError, EditorState};
use polymodal_core::modality::ModalityRegistry;
use polymodal_core::predicate::SyncMessage;
use polymodal_core::{schemas, DataFormat, Dataset, Predicate, Value};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value as Json};
use tokio::sync::Mutex;

use crate::artifacts;

pub const MAX_UPLOAD_BYTES: usize = 10 * 1024 * 1024;
pub const VERSION_HEADER: &str = "x-state-version";

#[derive(Clone, Debug, Serialize)]
pub struct SessionHandle {
    pub session_id: String,
    pub created_at: String,
}

struct Snapshot {
    version: u64,
    state: EditorState,
}

struct Session {
    handle: SessionHandle,
    current: RwLock<Arc<Snapshot>>,
    queue: Mutex<()>,
}

impl Session {
    fn snapshot(&self) -> Arc<Snapshot> {
        self.current.read().expect("snapshot lock").clone()
    }
}

#[derive(Default)]
pub struct AppState {
    sessions: RwLock<HashMap<String, Arc<Session>>>,
    registry: ModalityRegistry,
}

type Shared = Arc<AppState>;

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, axum::Json(json!({ "error": message.into() }))).into_response()
}

fn versioned(status: StatusCode, version: u64, body: Json) -> Response {
    let mut r = (status, axum::Json(body)).into_response();
    r.headers_mut().insert(VERSION_HEADER, HeaderValue::from(version));
    r
}

fn bytes_response(version: u64, content_type: &'static str, bytes: Vec<u8>) -> Response {
    let mut r = Response::new(Body::from(bytes));
    r.headers_mut().insert(header::CONTENT_TYPE, HeaderValue::from_static(content_type));
    r.headers_mut().insert(VERSION_HEADER, HeaderValue::from(version));
    r
}

fn parse_body<T: for<'de> Deserialize<'de>>(body: &Bytes) -> Result<T, Response> {
    serde_json::from_slice(body).map_err(|e| error(StatusCode::BAD_REQUEST, format!("malformed payload: {e}")))
}

fn session(app: &AppState, id: &str) -> Result<Arc<Session>, Response> {
    app.sessions
        .read()
        .expect("session map lock")
        .get(id)
        .cloned()
        .ok_or_else(|| error(StatusCode::NOT_FOUND, format!("unknown session `{id}`")))
}

#[derive(Deserialize)]
struct CreateSession {
    #[serde(default)]
    content: Option<String>,
    #[serde(default = "default_format")]
    format: DataFormat,
}

fn default_format() -> DataFormat {
    DataFormat::Csv
}

async fn create_session(State(app): State<Shared>, body: Bytes) -> Response {
    let req: CreateSession = match parse_body(&body) {
        Ok(r) => r,
        Err(r) => return r,
    };
    let state = match req.content {
        Some(content) => match Dataset::load_typed(content.as_bytes(), req.format) {
            Ok(ds) => EditorState::new(ds),
            Err(e) => return error(StatusCode::BAD_REQUEST, e.to_string()),
        },
        None => EditorState::default(),
    };
    let handle = SessionHandle {
        session_id: uuid::Uuid::new_v4().to_string(),
        created_at: chrono::Utc::now().to_rfc3339(),
    };
    let body = json!({
        "session_id": handle.session_id,
        "created_at": handle.created_at,
        "version": 0,
        "state": state,
    });
    let s = Arc::new(Session {
        handle: handle.clone(),
        current: RwLock::new(Arc::new(Snapshot { version: 0, state })),
        queue: Mutex::new(()),
    });
    app.sessions
        .write()
        .expect("session map lock")
        .insert(handle.session_id, s);
    versioned(StatusCode::CREATED, 0, body)
}

async fn get_state(State(app): State<Shared>, Path(id): Path<String>) -> Response {
    let s = match session(&app, &id) {
        Ok(s) => s,
        Err(r) => return r,
    };
    let snap = s.snapshot();
    versioned(
        StatusCode::OK,
        snap.version,
        json!({
            "session_id": s.handle.session_id,
            "created_at": s.handle.created_at,
            "version": snap.version,
            "state": snap.state,
        }),
    )
}

async fn post_action(State(app): State<Shared>, Path(id): Path<String>, body: Bytes) -> Response {
    let s = match session(&app, &id) {
        Ok(s) => s,
        Err(r) => return r,
    };
    let action: EditAction = match parse_body(&body) {
        Ok(a) => a,
        Err(r) => return r,
    };
    let _turn = s.queue.lock().await;
    let snap = s.snapshot();
    match apply_edit(&snap.state, &action) {
        Ok(next) => {
            let version = snap.version + 1;
            let body = json!({ "version": version, "state": next });
            *s.current.write().expect("snapshot lock") = Arc::new(Snapshot { version, state: next });
            versioned(StatusCode::OK, version, body)
        }
        Err(EditError::InvalidResult(report)) => versioned(
            StatusCode::CONFLICT,
            snap.version,
            json!({ "version": snap.version, "error": "action would produce an invalid spec", "report": report }),
        ),
        Err(EditError::InvalidAction(message)) => versioned(
            StatusCode::CONFLICT,
            snap.version,
            json!({ "version": snap.version, "error": message, "report": { "violations": [] } }),
        ),
        Err(EditError::Ingest(e)) => error(StatusCode::BAD_REQUEST, e.to_string()),
    }
}

#[derive(Deserialize, Default)]
struct ArtifactQuery {
    /// `plain` for the text outline, `wav` for rendered audio.
    format: Option<String>,
    /// Predicate JSON.
    filter: Option<String>,
    rate: Option<f64>,
    ticks: Option<bool>,
    order: Option<String>,
    /// Selected values for playback orders, as `field=value` pairs joined by `;`.
    at: Option<String>,
    track: Option<usize>,
    sample_rate: Option<u32>,
}

fn query_filter(q: &ArtifactQuery, dataset: &Dataset) -> Result<Predicate, Response> {
    let Some(text) = &q.filter else {
        return Ok(Predicate::True);
    };
    let p: Predicate =
        serde_json::from_str(text).map_err(|e| error(StatusCode::BAD_REQUEST, format!("malformed filter: {e}")))?;
    p.check(dataset)
        .map_err(|e| error(StatusCode::BAD_REQUEST, format!("filter: {e}")))?;
    Ok(p)
}

fn query_at(q: &ArtifactQuery) -> Result<Vec<(String, Value)>, Response> {
    let Some(text) = &q.at else {
        return Ok(Vec::new());
    };
    text.split(';')
        .filter(|s| !s.is_empty())
        .map(|item| {
            let (f, v) = item
                .split_once('=')
                .ok_or_else(|| error(StatusCode::BAD_REQUEST, format!("`at` expects field=value, got `{item}`")))?;
            Ok((f.to_string(), v.parse::<f64>().map(Value::from).unwrap_or_else(|_| Value::from(v))))
        })
        .collect()
}

async fn get_artifact(State(app): State<Shared>, Path((id, kind)): Path<(String, String)>, Query(q): Query<ArtifactQuery>) -> Response {
    let s = match session(&app, &id) {
        Ok(s) => s,
        Err(r) => return r,
    };
    let snap = s.snapshot();
    let (spec, ds) = (&snap.state.spec, &snap.state.dataset);
    match kind.as_str() {
        "visual" => match artifacts::visual(spec, ds) {
            Ok(bytes) => bytes_response(snap.version, "application/json", bytes),
            Err(e) => versioned(StatusCode::CONFLICT, snap.version, json!({ "version": snap.version, "error": e.to_string() })),
        },
        "text" => {
            let filter = match query_filter(&q, ds) {
                Ok(p) => p,
                Err(r) => return r,
            };
            let tree = artifacts::tree(spec, ds, &filter);
            match q.format.as_deref() {
                Some("plain") => bytes_response(snap.version, "text/plain; charset=utf-8", artifacts::text_plain(&tree)),
                None | Some("json") => bytes_response(snap.version, "application/json", artifacts::text_json(&tree)),
                Some(other) => error(StatusCode::BAD_REQUEST, format!("unknown text format `{other}`")),
            }
        }
        "audio" => {
            let filter = match query_filter(&q, ds) {
                Ok(p) => p,
                Err(r) => return r,
            };
            let at = match query_at(&q) {
                Ok(a) => a,
                Err(r) => return r,
            };
            let order = match &q.order {
                None => None,
                Some(d) => match spec.audio.iter().find_map(|u| find_order(u, &at, ds, d)) {
                    Some(o) => Some(o),
                    None => return error(StatusCode::BAD_REQUEST, format!("no playback order `{d}`")),
                },
            };
            let rate = q.rate.unwrap_or(1.0);
            if !(rate > 0.0) {
                return error(StatusCode::BAD_REQUEST, "rate must be positive");
            }
            let options = ScheduleOptions {
                rate,
                ticks: q.ticks.unwrap_or(true),
                filter,
                order,
            };
            let schedules = match artifacts::schedules(spec, ds, &options) {
                Ok(s) => s,
                Err(e) => return versioned(StatusCode::CONFLICT, snap.version, json!({ "version": snap.version, "error": e.to_string() })),
            };
            match q.format.as_deref() {
                None | Some("json") => bytes_response(snap.version, "application/json", artifacts::audio_json(&schedules)),
                Some("wav") | Some("cues") => {
                    let rate = q.sample_rate.unwrap_or(artifacts::DEFAULT_SAMPLE_RATE);
                    let files = match artifacts::wav_files(spec, &schedules, rate) {
                        Ok(f) => f,
                        Err(e) => return error(StatusCode::BAD_REQUEST, e.to_string()),
                    };
                    let Some(file) = files.into_iter().nth(q.track.unwrap_or(0)) else {
                        return error(StatusCode::NOT_FOUND, "no such audio track");
                    };
                    if q.format.as_deref() == Some("wav") {
                        bytes_response(snap.version, "audio/wav", file.wav)
                    } else {
                        bytes_response(snap.version, "application/json", file.cues)
                    }
                }
                Some(other) => error(StatusCode::BAD_REQUEST, format!("unknown audio format `{other}`")),
            }
        }
        other => error(StatusCode::NOT_FOUND, format!("unknown artifact `{other}`")),
    }
}

#[derive(Deserialize)]
struct SelectionRequest {
    #[serde(flatten)]
    message: SyncMessage,
    /// The state version the selection was made against.
    #[serde(default)]
    version: Option<u64>,
}

async fn post_selection(State(app): State<Shared>, Path(id): Path<String>, body: Bytes) -> Response {
    let s = match session(&app, &id) {
        Ok(s) => s,
        Err(r) => return r,
    };
    let req: SelectionRequest = match parse_body(&body) {
        Ok(r) => r,
        Err(r) => return r,
    };
    let snap = s.snapshot();
    if let Some(v) = req.version {
        if v != snap.version {
            return versioned(
                StatusCode::CONFLICT,
                snap.version,
                json!({ "version": snap.version, "error": format!("stale selection: made at version {v}") }),
            );
        }
    }
    match app.registry.reify(&req.message, &snap.state.spec, &snap.state.dataset) {
        Ok(effects) => {
            let effects: Vec<Json> = effects
                .into_iter()
                .map(|(m, e)| {
                    let mut obj = serde_json::to_value(e).expect("effects serialize");
                    obj["modality"] = json!(m);
                    obj
                })
                .collect();
            versioned(StatusCode::OK, snap.version, json!({ "version": snap.version, "effects": effects }))
        }
        Err(e) => versioned(StatusCode::CONFLICT, snap.version, json!({ "version": snap.version, "error": e.to_string() })),
    }
}

async fn get_schema(Path(name): Path<String>) -> Response {
    match schemas::get(name.trim_end_matches(".schema.json")) {
        Some(s) => axum::Json(s).into_response(),
        None => error(StatusCode::NOT_FOUND, format!("unknown schema `{name}`")),
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/state", get(get_state))
        .route("/sessions/{id}/actions", post(post_action))
        .route("/sessions/{id}/artifacts/{kind}", get(get_artifact))
        .route("/sessions/{id}/selection", post(post_selection))
        .route("/schemas/{name}", get(get_schema))
        .layer(DefaultBodyLimit::max(MAX_UPLOAD_BYTES))
        .with_state(state)
}

pub async fn serve(addr: &str) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(Arc::new(AppState::default()))).await
}
