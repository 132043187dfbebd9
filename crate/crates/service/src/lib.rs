//! HTTP front end for sheetaudit.
//!
//! A workbook posted to `/sessions` opens a session that holds the parsed
//! sheet, its DDG and the auditor's sink curation. Every analysis endpoint
//! returns the same versioned envelope as the command line tool. Sessions
//! live in memory and expire after a period without requests.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{json, Value};
use sheetaudit::report::{error_json, Analysis};
use sheetaudit::{
    parse_a1, to_dot, CellAddr, ClassParams, DotStyle, EqLevel, Error, GeometryParams, SinkCuration, SrgMode,
    SrgRequest, WorkbookFormat,
};
use tower_http::cors::CorsLayer;

pub const DEFAULT_IDLE: Duration = Duration::from_secs(30 * 60);

struct Session {
    analysis: Analysis,
    /// `None` when the DDG is cyclic.
    curation: RwLock<Option<SinkCuration>>,
    cache: Mutex<HashMap<String, Value>>,
    last_used: Mutex<Instant>,
}

impl Session {
    fn touch(&self) {
        *self.last_used.lock().unwrap() = Instant::now();
    }

    fn idle_for(&self) -> Duration {
        self.last_used.lock().unwrap().elapsed()
    }

    fn curation(&self) -> Result<SinkCuration, ApiError> {
        self.curation
            .read()
            .unwrap()
            .clone()
            .ok_or_else(|| match self.analysis.cycle() {
                Some(cycle) => Error::CyclicDdg(cycle).into(),
                None => ApiError::internal("curation missing on an acyclic sheet"),
            })
    }

    /// Cached by `key`; curation-dependent keys include the exclusion list.
    fn cached(&self, key: String, compute: impl FnOnce() -> Result<Value, Error>) -> Result<Value, ApiError> {
        if let Some(v) = self.cache.lock().unwrap().get(&key) {
            return Ok(v.clone());
        }
        let v = compute()?;
        self.cache.lock().unwrap().insert(key, v.clone());
        Ok(v)
    }
}

#[derive(Clone)]
pub struct AppState {
    sessions: Arc<Mutex<HashMap<String, Arc<Session>>>>,
    idle: Duration,
}

impl Default for AppState {
    fn default() -> Self {
        Self::with_idle_timeout(DEFAULT_IDLE)
    }
}

impl AppState {
    pub fn with_idle_timeout(idle: Duration) -> Self {
        Self {
            sessions: Arc::default(),
            idle,
        }
    }

    pub fn session_count(&self) -> usize {
        self.sessions.lock().unwrap().len()
    }

    /// Drops sessions idle for longer than the timeout.
    pub fn expire_idle(&self) {
        let idle = self.idle;
        self.sessions.lock().unwrap().retain(|_, s| s.idle_for() <= idle);
    }

    fn session(&self, id: &str) -> Result<Arc<Session>, ApiError> {
        self.expire_idle();
        let s = self
            .sessions
            .lock()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "UnknownSession", format!("no session `{id}`")))?;
        s.touch();
        Ok(s)
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: Value,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: String) -> Self {
        Self {
            status,
            body: json!({ "error": { "code": code, "message": message } }),
        }
    }

    fn internal(message: &str) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", message.to_string())
    }

    fn invalid(message: String) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, "InvalidParameter", message)
    }
}

/// HTTP status for a core error.
pub fn status_of(e: &Error) -> StatusCode {
    match e {
        Error::UnknownModule(_) | Error::NotAModuleVertex(_) | Error::NotExpanded(_) => StatusCode::NOT_FOUND,
        Error::NotASink(_) | Error::NotExcluded(_) | Error::RestoreBlocked { .. } => StatusCode::CONFLICT,
        _ => StatusCode::UNPROCESSABLE_ENTITY,
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        Self {
            status: status_of(&e),
            body: error_json(&e),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

type ApiResult = Result<Response, ApiError>;
type Params = Query<HashMap<String, String>>;

fn json_ok(v: Value) -> ApiResult {
    Ok(Json(v).into_response())
}

fn level_param(q: &HashMap<String, String>, name: &str, default: EqLevel) -> Result<EqLevel, ApiError> {
    match q.get(name) {
        None => Ok(default),
        Some(v) => v
            .parse()
            .map_err(|_| ApiError::invalid(format!("{name} must be copy, logical or structural, got `{v}`"))),
    }
}

fn u32_param(q: &HashMap<String, String>, name: &str) -> Result<Option<u32>, ApiError> {
    q.get(name)
        .map(|v| {
            v.parse()
                .map_err(|_| ApiError::invalid(format!("{name} must be a non-negative integer, got `{v}`")))
        })
        .transpose()
}

fn class_params(q: &HashMap<String, String>) -> Result<ClassParams, ApiError> {
    let d = ClassParams::default();
    let d_h = u32_param(q, "dh")?.unwrap_or(d.geometry.d_h);
    let d_v = u32_param(q, "dv")?.unwrap_or(d.geometry.d_v);
    Ok(ClassParams {
        geometry: GeometryParams::new(d_h, d_v, u32_param(q, "dman")?)?,
        eq_start: level_param(q, "eqStart", d.eq_start)?,
        eq_rest: level_param(q, "eqRest", d.eq_rest)?,
    })
}

fn cache_key(command: &str, parts: &[&dyn std::fmt::Debug]) -> String {
    format!("{command}{parts:?}")
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(summary).delete(delete_session))
        .route("/sessions/{id}/grid", get(grid))
        .route("/sessions/{id}/inspect", get(inspect))
        .route("/sessions/{id}/areas", get(areas))
        .route("/sessions/{id}/classes", get(classes))
        .route("/sessions/{id}/constants", get(constants))
        .route("/sessions/{id}/diff", get(diff))
        .route("/sessions/{id}/sinks", get(sinks))
        .route("/sessions/{id}/sinks/exclude", post(exclude))
        .route("/sessions/{id}/sinks/restore", post(restore))
        .route("/sessions/{id}/modules", get(modules))
        .route("/sessions/{id}/srg", get(srg))
        .route("/sessions/{id}/trace", get(trace))
        .route("/sessions/{id}/report", get(report))
        .layer(CorsLayer::permissive())
        .with_state(state)
}

/// Serves until the process is stopped, sweeping idle sessions once a minute.
pub async fn serve(addr: SocketAddr, state: AppState) -> std::io::Result<()> {
    let sweeper = state.clone();
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(Duration::from_secs(60));
        loop {
            tick.tick().await;
            sweeper.expire_idle();
        }
    });
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(state)).await
}

fn sniff(body: &str, q: &HashMap<String, String>) -> Result<WorkbookFormat, ApiError> {
    match q.get("format") {
        Some(f) => f.parse().map_err(|e: Error| e.into()),
        None if body.trim_start().starts_with('{') => Ok(WorkbookFormat::Json),
        None => Ok(WorkbookFormat::Csv),
    }
}

fn session_summary(id: &str, analysis: &Analysis) -> Value {
    let inspect = analysis.inspect().to_json();
    json!({
        "id": id,
        "input": inspect["input"],
        "sheet": inspect["result"]["sheet"],
        "diagnostics": inspect["diagnostics"],
    })
}

async fn create_session(State(state): State<AppState>, Query(q): Params, body: Bytes) -> ApiResult {
    let text =
        std::str::from_utf8(&body).map_err(|_| ApiError::from(Error::MalformedWorkbook("body is not UTF-8".into())))?;
    let analysis = Analysis::load(text, sniff(text, &q)?)?;
    let curation = analysis.curation(&[]).ok();
    let id = uuid::Uuid::new_v4().simple().to_string();
    let summary = session_summary(&id, &analysis);
    let session = Session {
        analysis,
        curation: RwLock::new(curation),
        cache: Mutex::default(),
        last_used: Mutex::new(Instant::now()),
    };
    state.expire_idle();
    state.sessions.lock().unwrap().insert(id, Arc::new(session));
    Ok((StatusCode::CREATED, Json(summary)).into_response())
}

async fn summary(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let s = state.session(&id)?;
    json_ok(session_summary(&id, &s.analysis))
}

async fn delete_session(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult {
    state.session(&id)?;
    state.sessions.lock().unwrap().remove(&id);
    Ok(StatusCode::NO_CONTENT.into_response())
}

async fn grid(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let s = state.session(&id)?;
    json_ok(s.cached("grid".into(), || Ok(s.analysis.grid().to_json()))?)
}

async fn inspect(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let s = state.session(&id)?;
    json_ok(s.cached("inspect".into(), || Ok(s.analysis.inspect().to_json()))?)
}

async fn areas(State(state): State<AppState>, Path(id): Path<String>, Query(q): Params) -> ApiResult {
    let s = state.session(&id)?;
    let level = level_param(&q, "level", EqLevel::Copy)?;
    json_ok(s.cached(cache_key("areas", &[&level]), || Ok(s.analysis.areas(level).to_json()))?)
}

async fn classes(State(state): State<AppState>, Path(id): Path<String>, Query(q): Params) -> ApiResult {
    let s = state.session(&id)?;
    let p = class_params(&q)?;
    json_ok(s.cached(cache_key("classes", &[&p]), || Ok(s.analysis.classes(&p).to_json()))?)
}

async fn constants(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let s = state.session(&id)?;
    json_ok(s.cached("constants".into(), || Ok(s.analysis.constants().to_json()))?)
}

async fn diff(State(state): State<AppState>, Path(id): Path<String>, Query(q): Params) -> ApiResult {
    let s = state.session(&id)?;
    let fine = level_param(&q, "fine", EqLevel::Copy)?;
    let coarse = level_param(&q, "coarse", EqLevel::Logical)?;
    json_ok(s.cached(cache_key("diff", &[&fine, &coarse]), || {
        s.analysis.diff(fine, coarse).map(|r| r.to_json())
    })?)
}

async fn sinks(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let s = state.session(&id)?;
    let cur = s.curation()?;
    json_ok(s.analysis.sinks_report(&cur).to_json())
}

#[derive(Deserialize)]
struct CellBody {
    cell: String,
}

fn cell_of(body: &CellBody) -> Result<CellAddr, ApiError> {
    parse_a1(&body.cell).map_err(ApiError::from)
}

fn parse_cell_body(body: &Bytes) -> Result<CellAddr, ApiError> {
    let parsed: CellBody =
        serde_json::from_slice(body).map_err(|e| ApiError::invalid(format!("expected {{\"cell\": \"A1\"}}: {e}")))?;
    cell_of(&parsed)
}

/// Applies `step` under the session's write lock.
fn mutate(
    s: &Session,
    step: impl FnOnce(&SinkCuration) -> Result<SinkCuration, Error>,
) -> Result<SinkCuration, ApiError> {
    let mut guard = s.curation.write().unwrap();
    let current = guard
        .as_ref()
        .ok_or_else(|| ApiError::from(Error::CyclicDdg(s.analysis.cycle().unwrap_or_default())))?;
    let next = step(current)?;
    *guard = Some(next.clone());
    Ok(next)
}

async fn exclude(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult {
    let s = state.session(&id)?;
    let cell = parse_cell_body(&body)?;
    let next = mutate(&s, |cur| sheetaudit::exclude_sink(cur, s.analysis.ddg(), cell))?;
    json_ok(s.analysis.sinks_report(&next).to_json())
}

async fn restore(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult {
    let s = state.session(&id)?;
    let cell = parse_cell_body(&body)?;
    let next = mutate(&s, |cur| sheetaudit::restore_sink(cur, s.analysis.ddg(), cell))?;
    json_ok(s.analysis.sinks_report(&next).to_json())
}

async fn modules(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let s = state.session(&id)?;
    let cur = s.curation()?;
    json_ok(s.cached(cache_key("modules", &[&cur.exclusions()]), || {
        s.analysis.modules(&cur.exclusions()).map(|r| r.to_json())
    })?)
}

fn srg_request(q: &HashMap<String, String>) -> Result<SrgRequest, ApiError> {
    let mode = match q.get("mode").map(String::as_str) {
        None | Some("modules") => SrgMode::Modules,
        Some("units") => SrgMode::Units,
        Some(other) => {
            return Err(ApiError::invalid(format!(
                "mode must be units or modules, got `{other}`"
            )))
        }
    };
    let fisheye = q
        .get("fisheye")
        .map(|f| f.split(',').filter(|s| !s.is_empty()).map(str::to_string).collect())
        .unwrap_or_default();
    Ok(SrgRequest {
        mode,
        fisheye,
        classes: class_params(q)?,
    })
}

async fn srg(State(state): State<AppState>, Path(id): Path<String>, Query(q): Params) -> ApiResult {
    let s = state.session(&id)?;
    let req = srg_request(&q)?;
    // units mode ignores curation and works on cyclic sheets
    let exclusions = match req.mode {
        SrgMode::Modules => s.curation()?.exclusions(),
        SrgMode::Units => Vec::new(),
    };
    match q.get("format").map(String::as_str) {
        None | Some("json") => {
            let key = cache_key("srg", &[&req.mode, &req.fisheye, &req.classes, &exclusions]);
            json_ok(s.cached(key, || s.analysis.srg(&req, &exclusions).map(|r| r.to_json()))?)
        }
        Some("dot") => {
            let style = match q.get("style").map(String::as_str) {
                None | Some("audit") => DotStyle::Audit,
                Some("plain") => DotStyle::Plain,
                Some(other) => {
                    return Err(ApiError::invalid(format!(
                        "style must be plain or audit, got `{other}`"
                    )))
                }
            };
            let graph = s.analysis.srg_graph(&req, &exclusions)?;
            Ok(([(header::CONTENT_TYPE, "text/vnd.graphviz")], to_dot(&graph, style)).into_response())
        }
        Some(other) => Err(ApiError::invalid(format!("format must be json or dot, got `{other}`"))),
    }
}

async fn trace(State(state): State<AppState>, Path(id): Path<String>, Query(q): Params) -> ApiResult {
    let s = state.session(&id)?;
    let module = q
        .get("module")
        .ok_or_else(|| ApiError::invalid("module is required".into()))?;
    let exclusions = s.curation()?.exclusions();
    json_ok(s.cached(cache_key("trace", &[module, &exclusions]), || {
        s.analysis.trace(module, &exclusions).map(|r| r.to_json())
    })?)
}

async fn report(State(state): State<AppState>, Path(id): Path<String>, Query(q): Params) -> ApiResult {
    let s = state.session(&id)?;
    let p = class_params(&q)?;
    let exclusions = s.curation().map(|c| c.exclusions()).unwrap_or_default();
    // timings differ per run, so the full report is not cached
    json_ok(s.analysis.full(&p, &exclusions)?.to_json())
}
