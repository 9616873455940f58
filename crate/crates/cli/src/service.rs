//! HTTP/JSON facade over the engine for the browser client.
//!
//! A session owns one scene, its cloud and density field, and at most one
//! current selection. Selections on a session run one at a time; a second
//! request while one is in flight gets `429`. Density fields are cached by
//! cloud content, grid and KDE parameters, and the surface placement.

use std::collections::{HashMap, VecDeque};
use std::ops::Index;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};
use tower_http::cors::{AllowOrigin, CorsLayer};

use crossel_core::field::{cloud_to_csv, load_cloud, parse_cloud_csv};
use crossel_core::pipeline::{estimate_field, EstimateOptions, SelectOptions, Workspace};
use crossel_core::selection::{default_ray_step, ray_max_density, subtract, SelectionJson};
use crossel_core::traces::{parse_trace, DEFAULT_SURFACE_EPS};
use crossel_core::{DensityField, Error, PointCloud, Ray, Scene, SelectionResult, Technique, Vec3};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    /// Idle time after which a session is dropped.
    pub ttl: Duration,
    /// Density fields kept in the cache.
    pub cache_entries: usize,
    /// Origin allowed by CORS; any origin when `None`.
    pub ui_origin: Option<String>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            ttl: Duration::from_secs(30 * 60),
            cache_entries: 8,
            ui_origin: None,
        }
    }
}

pub struct Session {
    pub id: String,
    pub workspace: Workspace,
    /// Held for the duration of a select; `try_lock` failure means busy.
    pub select_lock: tokio::sync::Mutex<()>,
    state: Mutex<SessionState>,
}

struct SessionState {
    current: Option<SelectionResult>,
    /// World-frame OBJ text of the current mesh and its ETag.
    mesh: Option<(String, String)>,
    last_used: Instant,
}

impl Session {
    fn touch(&self) {
        self.state.lock().unwrap().last_used = Instant::now();
    }

    fn idle_for(&self) -> Duration {
        self.state.lock().unwrap().last_used.elapsed()
    }
}

/// Small insertion-ordered cache of density fields.
#[derive(Default)]
struct FieldCache {
    entries: VecDeque<(String, Arc<DensityField>)>,
}

impl FieldCache {
    fn get(&self, key: &str) -> Option<Arc<DensityField>> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, f)| f.clone())
    }

    fn insert(&mut self, key: String, field: Arc<DensityField>, capacity: usize) {
        if capacity == 0 || self.get(&key).is_some() {
            return;
        }
        while self.entries.len() >= capacity {
            self.entries.pop_front();
        }
        self.entries.push_back((key, field));
    }
}

pub struct AppState {
    pub config: ServiceConfig,
    sessions: Mutex<HashMap<String, Arc<Session>>>,
    cache: Mutex<FieldCache>,
    counter: AtomicU64,
}

impl AppState {
    pub fn new(config: ServiceConfig) -> Arc<Self> {
        Arc::new(AppState {
            config,
            sessions: Mutex::new(HashMap::new()),
            cache: Mutex::new(FieldCache::default()),
            counter: AtomicU64::new(0),
        })
    }

    /// Live session by id; expired sessions are dropped on lookup.
    pub fn session(&self, id: &str) -> Option<Arc<Session>> {
        let mut sessions = self.sessions.lock().unwrap();
        let s = sessions.get(id)?.clone();
        if s.idle_for() > self.config.ttl {
            sessions.remove(id);
            return None;
        }
        Some(s)
    }

    /// Drops every session idle for longer than the TTL.
    pub fn sweep(&self) -> usize {
        let mut sessions = self.sessions.lock().unwrap();
        let before = sessions.len();
        sessions.retain(|_, s| s.idle_for() <= self.config.ttl);
        before - sessions.len()
    }

    pub fn session_count(&self) -> usize {
        self.sessions.lock().unwrap().len()
    }
}

/// An error response with a JSON `{"error": ...}` body.
#[derive(Debug)]
pub struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

impl ApiError {
    fn bad_request(msg: impl Into<String>) -> Self {
        ApiError(StatusCode::BAD_REQUEST, msg.into())
    }

    fn not_found(msg: impl Into<String>) -> Self {
        ApiError(StatusCode::NOT_FOUND, msg.into())
    }

    fn internal(msg: impl Into<String>) -> Self {
        ApiError(StatusCode::INTERNAL_SERVER_ERROR, msg.into())
    }
}

/// Status for an engine error raised while handling a request body.
fn request_error(err: Error) -> ApiError {
    let status = match err {
        Error::EmptyRegion => StatusCode::CONFLICT,
        Error::Numeric(_) | Error::Degenerate(_) => StatusCode::UNPROCESSABLE_ENTITY,
        _ => StatusCode::BAD_REQUEST,
    };
    ApiError(status, err.to_string())
}

type ApiResult<T> = Result<T, ApiError>;

fn parse_body<T: for<'de> Deserialize<'de>>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("malformed request: {e}")))
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn router(state: Arc<AppState>) -> Router {
    let origin = match &state.config.ui_origin {
        Some(o) => match HeaderValue::from_str(o) {
            Ok(v) => AllowOrigin::exact(v),
            Err(_) => AllowOrigin::any(),
        },
        None => AllowOrigin::any(),
    };
    let cors = CorsLayer::new()
        .allow_origin(origin)
        .allow_methods([Method::GET, Method::POST])
        .allow_headers([header::CONTENT_TYPE, header::IF_NONE_MATCH])
        .expose_headers([header::ETAG]);
    Router::new()
        .route("/api/session", post(create_session))
        .route("/api/session/{id}/select", post(select))
        .route("/api/session/{id}/mesh", get(mesh))
        .route("/api/session/{id}/camera", get(camera))
        .route("/api/session/{id}/snap", post(snap))
        .layer(DefaultBodyLimit::max(256 << 20))
        .layer(cors)
        .with_state(state)
}

/// Binds and serves until interrupted, sweeping idle sessions.
pub async fn serve(host: &str, port: u16, config: ServiceConfig) -> CliResult<()> {
    let listener = tokio::net::TcpListener::bind((host, port))
        .await
        .map_err(|e| CliError::environment(format!("cannot bind {host}:{port}: {e}")))?;
    let state = AppState::new(config);
    let sweeper = state.clone();
    let period = (state.config.ttl / 4).max(Duration::from_secs(1));
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(period);
        loop {
            tick.tick().await;
            sweeper.sweep();
        }
    });
    eprintln!("listening on http://{}", listener.local_addr().map_err(|e| CliError::environment(e.to_string()))?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| CliError::environment(format!("server: {e}")))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    pub scene: Scene,
    /// Cloud as CSV text.
    #[serde(default)]
    pub cloud_csv: Option<String>,
    /// Cloud file readable by the server.
    #[serde(default)]
    pub cloud_path: Option<PathBuf>,
    #[serde(default)]
    pub estimate: EstimateOptions,
}

#[derive(Debug, Serialize)]
struct CloudSummary {
    points: usize,
    min: [f64; 3],
    max: [f64; 3],
}

#[derive(Debug, Serialize)]
struct FieldStatus {
    ready: bool,
    cached: bool,
    resolution: [usize; 3],
    min: f64,
    max: f64,
    mass: f64,
}

/// Cache key: cloud content, estimation options and the surface placement
/// that fixes the field's frame. Surface size and head do not matter.
fn field_key(cloud: &PointCloud, scene: &Scene, options: &EstimateOptions) -> String {
    let s = &scene.surface;
    let frame = format!("{:?}{:?}{:?}", s.center.as_slice(), s.axis_x.as_slice(), s.axis_z.as_slice());
    let params = format!(
        "{}|{:?}|{:?}|{:?}",
        options.resolution, options.padding, options.kde.alpha, options.kde.pilot_bandwidth
    );
    sha256_hex(format!("{}|{params}|{frame}", sha256_hex(cloud_to_csv(cloud).as_bytes())).as_bytes())
}

fn summarize(cloud: &PointCloud) -> CloudSummary {
    let (mut lo, mut hi) = (cloud.positions[0], cloud.positions[0]);
    for p in &cloud.positions {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    CloudSummary {
        points: cloud.len(),
        min: [lo.x, lo.y, lo.z],
        max: [hi.x, hi.y, hi.z],
    }
}

async fn create_session(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult<Response> {
    let req: CreateSession = parse_body(&body)?;
    req.scene.validate().map_err(|e| ApiError::bad_request(e.to_string()))?;
    let cloud = match (&req.cloud_csv, &req.cloud_path) {
        (Some(text), None) => parse_cloud_csv(text),
        (None, Some(path)) => load_cloud(path, None),
        _ => return Err(ApiError::bad_request("give exactly one of cloud_csv and cloud_path")),
    };
    let cloud = cloud.map_err(|e| match e {
        Error::EmptyCloud => ApiError(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()),
        e => ApiError::bad_request(e.to_string()),
    })?;
    if cloud.is_empty() {
        return Err(ApiError(StatusCode::UNPROCESSABLE_ENTITY, Error::EmptyCloud.to_string()));
    }

    let key = field_key(&cloud, &req.scene, &req.estimate);
    let hit = state.cache.lock().unwrap().get(&key);
    let cached = hit.is_some();
    let field = match hit {
        Some(f) => f,
        None => {
            let (c, scene, options) = (cloud.clone(), req.scene.clone(), req.estimate);
            let field = tokio::task::spawn_blocking(move || estimate_field(&c, &scene, &options))
                .await
                .map_err(|e| ApiError::internal(e.to_string()))?
                .map_err(|e| ApiError(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))?;
            let field = Arc::new(field);
            state.cache.lock().unwrap().insert(key, field.clone(), state.config.cache_entries);
            field
        }
    };
    let workspace = Workspace::new(req.scene, (*field).clone(), Some(&cloud)).map_err(|e| ApiError::bad_request(e.to_string()))?;

    let n = state.counter.fetch_add(1, Ordering::Relaxed);
    let id = sha256_hex(format!("session-{n}").as_bytes())[..16].to_string();
    let status = FieldStatus {
        ready: true,
        cached,
        resolution: field.grid.resolution,
        min: field.min_value(),
        max: field.max_value(),
        mass: field.integrate_mass(),
    };
    let session = Arc::new(Session {
        id: id.clone(),
        workspace,
        select_lock: tokio::sync::Mutex::new(()),
        state: Mutex::new(SessionState {
            current: None,
            mesh: None,
            last_used: Instant::now(),
        }),
    });
    state.sessions.lock().unwrap().insert(id.clone(), session);
    Ok(Json(json!({ "id": id, "cloud": summarize(&cloud), "field": status })).into_response())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Set,
    Subtract,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectRequest {
    pub trace: serde_json::Value,
    pub technique: Technique,
    #[serde(default)]
    pub radius: Option<f64>,
    #[serde(default)]
    pub eps: Option<f64>,
    #[serde(default)]
    pub mode: Mode,
}

#[derive(Debug, Serialize)]
pub struct SelectResponse {
    pub selection: SelectionJson,
    pub mode: Mode,
    pub mesh: String,
    pub triangles: usize,
}

async fn select(State(state): State<Arc<AppState>>, Path(id): Path<String>, body: Bytes) -> ApiResult<Response> {
    let session = state.session(&id).ok_or_else(|| ApiError::not_found("unknown session"))?;
    let Ok(_guard) = session.select_lock.try_lock() else {
        return Err(ApiError(StatusCode::TOO_MANY_REQUESTS, "a selection is already running on this session".into()));
    };
    session.touch();
    let req: SelectRequest = parse_body(&body)?;
    let trace = parse_trace(&req.trace.to_string()).map_err(|e| ApiError::bad_request(e.to_string()))?;
    let options = SelectOptions {
        technique: req.technique,
        radius: req.radius,
        eps: req.eps.unwrap_or(DEFAULT_SURFACE_EPS),
    };

    let worker = session.clone();
    let current = session.state.lock().unwrap().current.clone();
    let mode = req.mode;
    let result = tokio::task::spawn_blocking(move || -> ApiResult<SelectionResult> {
        let fresh = worker.workspace.select(&trace, &options).map_err(request_error)?;
        match (mode, current) {
            (Mode::Set, _) => Ok(fresh),
            (Mode::Subtract, Some(current)) => subtract(&worker.workspace.field, &current, &fresh).map_err(request_error),
            (Mode::Subtract, None) => Err(ApiError(StatusCode::CONFLICT, "no current selection to subtract from".into())),
        }
    })
    .await
    .map_err(|e| ApiError::internal(e.to_string()))??;

    let obj = session.workspace.world_mesh(&result.mesh).to_obj();
    let etag = format!("\"{}\"", sha256_hex(obj.as_bytes()));
    let response = SelectResponse {
        selection: result.to_json(),
        mode,
        mesh: format!("/api/session/{id}/mesh"),
        triangles: result.mesh.triangles.len(),
    };
    let mut st = session.state.lock().unwrap();
    st.current = Some(result);
    st.mesh = Some((obj, etag));
    st.last_used = Instant::now();
    Ok(Json(response).into_response())
}

async fn mesh(State(state): State<Arc<AppState>>, Path(id): Path<String>, headers: HeaderMap) -> ApiResult<Response> {
    let session = state.session(&id).ok_or_else(|| ApiError::not_found("unknown session"))?;
    session.touch();
    let (obj, etag) = session
        .state
        .lock()
        .unwrap()
        .mesh
        .clone()
        .ok_or_else(|| ApiError::not_found("no current selection"))?;
    let matches = headers
        .get(header::IF_NONE_MATCH)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.split(',').any(|t| t.trim() == etag || t.trim() == "*"));
    if matches {
        return Ok((StatusCode::NOT_MODIFIED, [(header::ETAG, etag)]).into_response());
    }
    Ok((
        [(header::CONTENT_TYPE, "text/plain; charset=utf-8".to_string()), (header::ETAG, etag)],
        obj,
    )
        .into_response())
}

#[derive(Debug, Deserialize)]
pub struct CameraQuery {
    pub head: String,
}

fn parse_vec3(s: &str) -> Option<Vec3> {
    let parts: Vec<f64> = s.split(',').map(|c| c.trim().parse().ok()).collect::<Option<_>>()?;
    match parts.as_slice() {
        &[x, y, z] if x.is_finite() && y.is_finite() && z.is_finite() => Some(Vec3::new(x, y, z)),
        _ => None,
    }
}

/// Row-major nested arrays of an `r` by `c` matrix.
fn rows(m: &impl Index<(usize, usize), Output = f64>, r: usize, c: usize) -> Vec<Vec<f64>> {
    (0..r).map(|i| (0..c).map(|j| m[(i, j)]).collect()).collect()
}

async fn camera(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<CameraQuery>,
) -> ApiResult<Response> {
    let session = state.session(&id).ok_or_else(|| ApiError::not_found("unknown session"))?;
    session.touch();
    let head = parse_vec3(&q.head).ok_or_else(|| ApiError::bad_request("head must be x,y,z"))?;
    let setup = session
        .workspace
        .world_camera(head)
        .map_err(|e| ApiError(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))?;
    let v = |p: &Vec3| [p.x, p.y, p.z];
    Ok(Json(json!({
        "eye": v(&setup.eye),
        "near": setup.near,
        "far": setup.far,
        "view_rotation": rows(&setup.view_rotation, 3, 3),
        "view": rows(&setup.view_matrix(), 4, 4),
        "projection": rows(&setup.projection, 4, 4),
        "corner_bl": v(&setup.corner_bl),
        "corner_tr": v(&setup.corner_tr),
        "surface_center": v(&setup.surface_center),
    }))
    .into_response())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapRequest {
    /// Ray origin, usually the head.
    pub origin: [f64; 3],
    /// Any point the ray passes through.
    pub through: [f64; 3],
}

/// Densest point along a pick ray, for previewing air strokes.
async fn snap(State(state): State<Arc<AppState>>, Path(id): Path<String>, body: Bytes) -> ApiResult<Response> {
    let session = state.session(&id).ok_or_else(|| ApiError::not_found("unknown session"))?;
    session.touch();
    let req: SnapRequest = parse_body(&body)?;
    let ws = &session.workspace;
    let origin = ws.frame.to_local(&Vec3::from(req.origin));
    let through = ws.frame.to_local(&Vec3::from(req.through));
    let ray = Ray::new(origin, through - origin).map_err(request_error)?;
    let poi = ray_max_density(&ray, &ws.field, default_ray_step(&ws.field.grid)).map_err(request_error)?;
    let poi = poi.map(|p| {
        let w = ws.frame.to_world(&p);
        [w.x, w.y, w.z]
    });
    Ok(Json(json!({ "poi": poi })).into_response())
}
