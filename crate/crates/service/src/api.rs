//! The HTTP interface.
//!
//! Every mutation is applied to a copy of the project, persisted, and only then made
//! visible and streamed on `/projects/{p}/events`. Trace lines therefore reach the stream
//! in the order they reach the trace files.

use std::collections::BTreeMap;
use std::convert::Infallible;
use std::sync::{Arc, Mutex, MutexGuard};

use axum::body::Bytes;
use axum::extract::{Path, Request, State};
use axum::http::{HeaderMap, StatusCode};
use axum::middleware::{self, Next};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use futures::Stream;
use lob_core::Ident;
use lob_profiles::{Clock, SystemClock};
use serde::Deserialize;
use serde_json::json;
use tokio::sync::broadcast;

use crate::project::{Actor, Project, ProjectError, TraceLine, KINDS};
use crate::session::{Conflict, Sessions};
use crate::store::{Store, StoreError};

pub const TOKEN_HEADER: &str = "x-lob-token";
pub const SESSION_HEADER: &str = "x-lob-session";

/// A trace line of some project, as broadcast to stream subscribers.
#[derive(Debug, Clone)]
pub struct Published {
    pub project: Ident,
    pub line: TraceLine,
}

pub struct AppState {
    pub store: Store,
    projects: Mutex<BTreeMap<Ident, Project>>,
    sessions: Mutex<Sessions>,
    events: broadcast::Sender<Published>,
    token: Option<String>,
    clock: Arc<dyn Clock>,
}

impl AppState {
    /// Loads every project in `store`.
    pub fn new(store: Store, token: Option<String>) -> Result<Arc<AppState>, StoreError> {
        AppState::with_clock(store, token, Arc::new(SystemClock))
    }

    pub fn with_clock(store: Store, token: Option<String>, clock: Arc<dyn Clock>) -> Result<Arc<AppState>, StoreError> {
        let projects = store.load_all()?;
        let (events, _) = broadcast::channel(4096);
        Ok(Arc::new(AppState { store, projects: Mutex::new(projects), sessions: Mutex::default(), events, token, clock }))
    }

    fn projects(&self) -> MutexGuard<'_, BTreeMap<Ident, Project>> {
        self.projects.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn sessions(&self) -> MutexGuard<'_, Sessions> {
        self.sessions.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// A copy of a project as currently served.
    pub fn project(&self, name: &str) -> Option<Project> {
        self.projects().get(name).cloned()
    }

    pub fn subscribe(&self) -> broadcast::Receiver<Published> {
        self.events.subscribe()
    }
}

#[derive(Debug)]
pub enum ApiError {
    Project(ProjectError),
    Store(StoreError),
    Conflict(Conflict),
    Unauthorized,
    BadRequest(String),
}

impl From<ProjectError> for ApiError {
    fn from(e: ProjectError) -> Self {
        ApiError::Project(e)
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        ApiError::Store(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, body) = match self {
            ApiError::Project(e) => {
                let status = match &e {
                    ProjectError::NotFound { .. } => StatusCode::NOT_FOUND,
                    ProjectError::InUse(_) | ProjectError::Casmas(lob_profiles::casmas::CasmasError::InUse { .. }) => StatusCode::CONFLICT,
                    _ => StatusCode::BAD_REQUEST,
                };
                let mut body = json!({ "error": e.to_string() });
                match &e {
                    ProjectError::Diagnostics(ds) => body["diagnostics"] = json!(ds),
                    ProjectError::Invalid(report) => body["report"] = json!(report),
                    _ => {}
                }
                (status, body)
            }
            ApiError::Store(StoreError::Project(e)) => return ApiError::Project(e).into_response(),
            ApiError::Store(e) => (StatusCode::INTERNAL_SERVER_ERROR, json!({ "error": e.to_string() })),
            ApiError::Conflict(c) => (StatusCode::CONFLICT, json!({ "error": c.to_string() })),
            ApiError::Unauthorized => (StatusCode::UNAUTHORIZED, json!({ "error": format!("missing or wrong {TOKEN_HEADER}") })),
            ApiError::BadRequest(m) => (StatusCode::BAD_REQUEST, json!({ "error": m })),
        };
        (status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

pub fn router(state: Arc<AppState>) -> Router {
    let thing = "/projects/{project}/{kind}/{name}";
    Router::new()
        .route("/health", get(|| async { Json(json!({ "status": "ok" })) }))
        .route("/sessions", get(list_sessions).post(open_session))
        .route("/sessions/{id}", delete(close_session))
        .route("/projects", get(list_projects))
        .route("/projects/{project}", get(show_project).put(create_project).delete(delete_project))
        .route("/projects/{project}/definitions", get(definitions))
        .route("/projects/{project}/import", post(import))
        .route("/projects/{project}/events", get(events))
        .route("/projects/{project}/{kind}", get(list_kind))
        .route(thing, get(get_thing).put(put_thing).delete(delete_thing))
        .route(&format!("{thing}/{{action}}"), post(act))
        .layer(middleware::from_fn_with_state(state.clone(), require_token))
        .with_state(state)
}

async fn require_token(State(state): State<Arc<AppState>>, req: Request, next: Next) -> Response {
    if let Some(token) = &state.token {
        let given = req.headers().get(TOKEN_HEADER).and_then(|v| v.to_str().ok());
        if given != Some(token.as_str()) {
            return ApiError::Unauthorized.into_response();
        }
    }
    next.run(req).await
}

fn project_id(name: &str) -> ApiResult<Ident> {
    Ident::new(name).map_err(|e| ApiError::BadRequest(format!("project name: {e}")))
}

fn json_body(bytes: &Bytes) -> ApiResult<serde_json::Value> {
    if bytes.is_empty() {
        return Ok(json!({}));
    }
    serde_json::from_slice(bytes).map_err(|e| ApiError::BadRequest(format!("malformed JSON: {e}")))
}

#[derive(Deserialize)]
struct OpenSession {
    project: String,
    resource: String,
    author: String,
    #[serde(default)]
    max_iterations: Option<usize>,
}

async fn open_session(State(state): State<Arc<AppState>>, Json(req): Json<OpenSession>) -> ApiResult<Response> {
    if !state.projects().contains_key(req.project.as_str()) {
        return Err(ProjectError::NotFound { kind: "project", name: req.project }.into());
    }
    let s = state.sessions().open(req.project, req.resource, req.author, req.max_iterations).map_err(ApiError::Conflict)?;
    Ok((StatusCode::CREATED, Json(s)).into_response())
}

async fn close_session(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<StatusCode> {
    state.sessions().close(&id).ok_or(ProjectError::NotFound { kind: "session", name: id })?;
    Ok(StatusCode::NO_CONTENT)
}

async fn list_sessions(State(state): State<Arc<AppState>>) -> Json<serde_json::Value> {
    Json(json!(state.sessions().list()))
}

async fn list_projects(State(state): State<Arc<AppState>>) -> Json<Vec<String>> {
    Json(state.projects().keys().map(Ident::to_string).collect())
}

async fn show_project(State(state): State<Arc<AppState>>, Path(project): Path<String>) -> ApiResult<Json<serde_json::Value>> {
    let projects = state.projects();
    let p = projects.get(project.as_str()).ok_or_else(|| ProjectError::NotFound { kind: "project", name: project.clone() })?;
    let mut kinds = serde_json::Map::new();
    for kind in KINDS {
        kinds.insert(kind.into(), json!(p.list(kind)?));
    }
    Ok(Json(json!({ "name": project, "resources": kinds, "rounds": p.society.snapshot.rounds })))
}

async fn create_project(State(state): State<Arc<AppState>>, Path(project): Path<String>, headers: HeaderMap) -> ApiResult<Response> {
    let name = project_id(&project)?;
    authorize(&state, &headers, &project, "project")?;
    let mut projects = state.projects();
    if projects.contains_key(&name) {
        return Ok((StatusCode::OK, Json(json!({ "name": name }))).into_response());
    }
    let p = Project::new(name.clone());
    state.store.save_all(&p)?;
    projects.insert(name.clone(), p);
    Ok((StatusCode::CREATED, Json(json!({ "name": name }))).into_response())
}

async fn delete_project(State(state): State<Arc<AppState>>, Path(project): Path<String>, headers: HeaderMap) -> ApiResult<StatusCode> {
    authorize(&state, &headers, &project, "project")?;
    let mut projects = state.projects();
    if projects.remove(project.as_str()).is_none() {
        return Err(ProjectError::NotFound { kind: "project", name: project }.into());
    }
    state.store.delete(&project)?;
    state.sessions().close_project(&project);
    Ok(StatusCode::NO_CONTENT)
}

async fn definitions(State(state): State<Arc<AppState>>, Path(project): Path<String>) -> ApiResult<String> {
    let projects = state.projects();
    let p = projects.get(project.as_str()).ok_or(ProjectError::NotFound { kind: "project", name: project })?;
    Ok(p.definitions_text())
}

async fn list_kind(State(state): State<Arc<AppState>>, Path((project, kind)): Path<(String, String)>) -> ApiResult<Json<Vec<String>>> {
    let projects = state.projects();
    let p = projects.get(project.as_str()).ok_or(ProjectError::NotFound { kind: "project", name: project })?;
    Ok(Json(p.list(&kind)?))
}

async fn get_thing(State(state): State<Arc<AppState>>, Path((project, kind, name)): Path<(String, String, String)>) -> ApiResult<Json<serde_json::Value>> {
    let projects = state.projects();
    let p = projects.get(project.as_str()).ok_or(ProjectError::NotFound { kind: "project", name: project })?;
    Ok(Json(p.get(&kind, &name, state.clock.clone())?))
}

fn authorize(state: &AppState, headers: &HeaderMap, project: &str, resource: &str) -> ApiResult<Actor> {
    let id = headers.get(crate::api::SESSION_HEADER).and_then(|v| v.to_str().ok());
    let session = state.sessions().authorize(id, project, resource).map_err(ApiError::Conflict)?;
    Ok(match session {
        Some(s) => Actor { author: s.author.clone(), config: s.config(), clock: state.clock.clone() },
        None => Actor { author: "anonymous".into(), config: Default::default(), clock: state.clock.clone() },
    })
}

/// Applies `op` to a copy of the project, persists what it touched, then publishes.
fn mutate(
    state: &AppState,
    project: &str,
    op: impl FnOnce(&mut Project) -> Result<crate::project::Outcome, ProjectError>,
) -> ApiResult<Json<serde_json::Value>> {
    let mut projects = state.projects();
    let current = projects.get(project).ok_or_else(|| ProjectError::NotFound { kind: "project", name: project.into() })?;
    let mut next = current.clone();
    let outcome = op(&mut next)?;
    state.store.save(&next, &outcome.touched)?;
    let name = next.name.clone();
    projects.insert(name.clone(), next);
    for line in outcome.lines {
        // No subscribers is fine.
        let _ = state.events.send(Published { project: name.clone(), line });
    }
    Ok(Json(outcome.body))
}

async fn import(State(state): State<Arc<AppState>>, Path(project): Path<String>, headers: HeaderMap, body: String) -> ApiResult<Json<serde_json::Value>> {
    authorize(&state, &headers, &project, "project")?;
    mutate(&state, &project, |p| p.import("import.lob", &body))
}

async fn put_thing(
    State(state): State<Arc<AppState>>,
    Path((project, kind, name)): Path<(String, String, String)>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<Json<serde_json::Value>> {
    let actor = authorize(&state, &headers, &project, &format!("{kind}/{name}"))?;
    let v = json_body(&body)?;
    mutate(&state, &project, |p| p.put(&kind, &name, v, &actor))
}

async fn delete_thing(
    State(state): State<Arc<AppState>>,
    Path((project, kind, name)): Path<(String, String, String)>,
    headers: HeaderMap,
) -> ApiResult<Json<serde_json::Value>> {
    authorize(&state, &headers, &project, &format!("{kind}/{name}"))?;
    mutate(&state, &project, |p| p.delete(&kind, &name))
}

async fn act(
    State(state): State<Arc<AppState>>,
    Path((project, kind, name, action)): Path<(String, String, String, String)>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<Json<serde_json::Value>> {
    let mut actor = authorize(&state, &headers, &project, &format!("{kind}/{name}"))?;
    let v = json_body(&body)?;
    if let Some(author) = v.get("author").and_then(|a| a.as_str()) {
        actor.author = author.to_string();
    }
    mutate(&state, &project, |p| p.action(&kind, &name, &action, v, &actor))
}

/// Server-sent events: one `trace` event per line, data `<resource>\t<line>`.
async fn events(State(state): State<Arc<AppState>>, Path(project): Path<String>) -> ApiResult<Sse<impl Stream<Item = Result<Event, Infallible>>>> {
    if !state.projects().contains_key(project.as_str()) {
        return Err(ProjectError::NotFound { kind: "project", name: project }.into());
    }
    let rx = state.subscribe();
    let stream = futures::stream::unfold((rx, project), |(mut rx, project)| async move {
        loop {
            match rx.recv().await {
                Ok(p) if p.project == project.as_str() => {
                    let event = Event::default().event("trace").data(format!("{}\t{}", p.line.resource, p.line.line));
                    return Some((Ok(event), (rx, project)));
                }
                Ok(_) => continue,
                Err(broadcast::error::RecvError::Lagged(n)) => {
                    let event = Event::default().event("lagged").data(n.to_string());
                    return Some((Ok(event), (rx, project)));
                }
                Err(broadcast::error::RecvError::Closed) => return None,
            }
        }
    });
    Ok(Sse::new(stream).keep_alive(KeepAlive::default()))
}
