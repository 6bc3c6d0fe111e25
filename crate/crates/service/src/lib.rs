//! Local HTTP service behind the operator console.
//!
//! | method | path                        | body / query                         | reply                      |
//! |--------|-----------------------------|--------------------------------------|----------------------------|
//! | POST   | `/sessions`                 | TOFC bytes                           | 201 session info           |
//! | GET    | `/sessions/{id}`            |                                      | session info               |
//! | DELETE | `/sessions/{id}`            |                                      | 204                        |
//! | GET    | `/sessions/{id}/image`      | `kind=distance\|amplitude&min&max`   | 16-bit graymap             |
//! | POST   | `/sessions/{id}/correct`    | JSON [`CorrectRequest`]              | report; 409 / 422 on refusal |
//! | POST   | `/sessions/{id}/undo`       |                                      | `{"history_depth": n}`     |
//! | GET    | `/sessions/{id}/segment`    | `threshold_mm&relation`              | mask graymap               |
//! | GET    | `/sessions/{id}/export`     |                                      | polar TOFC bytes           |
//!
//! Errors are JSON `{"error": "..."}`. A refused correction (409 gate failure,
//! 422 undistorted or degenerate tags) returns the report document instead, and
//! never changes the session.

mod session;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::{header, HeaderName, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tofcorr::correction::{PipelineOptions, SegmentRule, DEFAULT_RATIO};
use tofcorr::io::{decode_tofc, encode_mask, encode_tofc, render_view, TofcImage, ViewKind};
use tofcorr::{CorrectionError, CorrectionReport, Relation, TagObservation};

pub use session::{HistoryEntry, Session};

pub const DEFAULT_BIND: &str = "127.0.0.1:8737";
pub const DEFAULT_TTL: Duration = Duration::from_secs(3600);
const MAX_UPLOAD_BYTES: usize = 512 * 1024 * 1024;

pub const GRAYMAP_MIME: &str = "image/x-portable-graymap";
pub const TOFC_MIME: &str = "application/octet-stream";

struct Slot {
    session: Arc<tokio::sync::Mutex<Session>>,
    last_used: Instant,
}

/// Shared state: the session table and its eviction policy.
pub struct AppState {
    sessions: Mutex<HashMap<String, Slot>>,
    ttl: Duration,
}

impl AppState {
    pub fn new(ttl: Duration) -> Self {
        Self {
            sessions: Mutex::new(HashMap::new()),
            ttl,
        }
    }

    fn table(&self) -> std::sync::MutexGuard<'_, HashMap<String, Slot>> {
        self.sessions.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn evict_expired(table: &mut HashMap<String, Slot>, ttl: Duration, now: Instant) {
        table.retain(|_, s| now.duration_since(s.last_used) < ttl);
    }

    fn insert(&self, session: Session) -> String {
        let id = uuid::Uuid::new_v4().simple().to_string();
        let now = Instant::now();
        let mut table = self.table();
        Self::evict_expired(&mut table, self.ttl, now);
        table.insert(
            id.clone(),
            Slot {
                session: Arc::new(tokio::sync::Mutex::new(session)),
                last_used: now,
            },
        );
        id
    }

    fn get(&self, id: &str) -> Result<Arc<tokio::sync::Mutex<Session>>, ApiError> {
        let now = Instant::now();
        let mut table = self.table();
        Self::evict_expired(&mut table, self.ttl, now);
        let slot = table
            .get_mut(id)
            .ok_or_else(|| ApiError::not_found(format!("no session '{id}'")))?;
        slot.last_used = now;
        Ok(Arc::clone(&slot.session))
    }

    fn remove(&self, id: &str) -> bool {
        self.table().remove(id).is_some()
    }

    pub fn session_count(&self) -> usize {
        self.table().len()
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: serde_json::Value,
}

impl ApiError {
    fn message(status: StatusCode, msg: impl Into<String>) -> Self {
        Self {
            status,
            body: json!({ "error": msg.into() }),
        }
    }

    fn bad_request(msg: impl Into<String>) -> Self {
        Self::message(StatusCode::BAD_REQUEST, msg)
    }

    fn not_found(msg: impl Into<String>) -> Self {
        Self::message(StatusCode::NOT_FOUND, msg)
    }

    fn report(status: StatusCode, report: &CorrectionReport) -> Self {
        Self {
            status,
            body: serde_json::to_value(report).expect("report serializes"),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct SessionInfo {
    pub session_id: String,
    pub rows: usize,
    pub cols: usize,
    pub mod_freq_hz: f64,
    pub history_depth: usize,
}

fn info(id: &str, s: &Session) -> SessionInfo {
    let cfg = s.current().config();
    SessionInfo {
        session_id: id.to_string(),
        rows: cfg.rows(),
        cols: cfg.cols(),
        mod_freq_hz: cfg.mod_freq_hz(),
        history_depth: s.depth(),
    }
}

/// One tag as two `row,col,rows,cols` rectangles.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TagSpec {
    pub white: String,
    pub black: String,
    #[serde(default)]
    pub label: Option<String>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentSpec {
    pub threshold_mm: f64,
    pub relation: Relation,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrectRequest {
    pub tags: Vec<TagSpec>,
    #[serde(default = "default_ratio")]
    pub ratio: f64,
    #[serde(default)]
    pub force: bool,
    #[serde(default)]
    pub segment: Option<SegmentSpec>,
}

fn default_ratio() -> f64 {
    DEFAULT_RATIO
}

/// Default label of the `i`-th tag (0-based), shared with the CLI.
pub fn default_tag_label(i: usize) -> String {
    format!("tag{}", i + 1)
}

impl CorrectRequest {
    pub fn tags(&self) -> Result<Vec<TagObservation>, CorrectionError> {
        self.tags
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let label = t.label.clone().unwrap_or_else(|| default_tag_label(i));
                TagObservation::parse(&t.white, &t.black, label)
            })
            .collect()
    }

    pub fn options(&self) -> PipelineOptions {
        PipelineOptions {
            ratio: self.ratio,
            force: self.force,
            segment: self
                .segment
                .map(|s| SegmentRule::from_mm(s.threshold_mm, s.relation)),
            ..PipelineOptions::default()
        }
    }
}

/// HTTP status for a pipeline refusal.
pub fn correction_status(err: &CorrectionError) -> StatusCode {
    match err {
        CorrectionError::Implausible(_) => StatusCode::CONFLICT,
        e if e.is_degenerate() => StatusCode::UNPROCESSABLE_ENTITY,
        _ => StatusCode::BAD_REQUEST,
    }
}

async fn create_session(
    State(state): State<Arc<AppState>>,
    body: Bytes,
) -> Result<(StatusCode, Json<SessionInfo>), ApiError> {
    let img = decode_tofc(&body).map_err(|e| ApiError::bad_request(e.to_string()))?;
    let polar = img
        .to_polar()
        .map_err(|e| ApiError::bad_request(e.to_string()))?;
    let session = Session::new(polar);
    let mut out = info("", &session);
    out.session_id = state.insert(session);
    Ok((StatusCode::CREATED, Json(out)))
}

async fn get_session(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> Result<Json<SessionInfo>, ApiError> {
    let session = state.get(&id)?;
    let s = session.lock().await;
    Ok(Json(info(&id, &s)))
}

async fn delete_session(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> Result<StatusCode, ApiError> {
    if state.remove(&id) {
        Ok(StatusCode::NO_CONTENT)
    } else {
        Err(ApiError::not_found(format!("no session '{id}'")))
    }
}

fn parse_query<T: std::str::FromStr>(
    q: &HashMap<String, String>,
    key: &str,
) -> Result<Option<T>, ApiError>
where
    T::Err: std::fmt::Display,
{
    q.get(key)
        .map(|v| {
            v.parse::<T>()
                .map_err(|e| ApiError::bad_request(format!("{key}: {e}")))
        })
        .transpose()
}

fn binary(mime: &'static str, bytes: Vec<u8>) -> Response {
    ([(header::CONTENT_TYPE, mime)], bytes).into_response()
}

async fn image(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<HashMap<String, String>>,
) -> Result<Response, ApiError> {
    let kind: ViewKind = parse_query(&q, "kind")?.unwrap_or(ViewKind::Distance);
    let min = parse_query::<f64>(&q, "min")?;
    let max = parse_query::<f64>(&q, "max")?;
    let session = state.get(&id)?;
    let s = session.lock().await;
    let bytes = render_view(s.current(), kind, min, max)
        .map_err(|e| ApiError::bad_request(e.to_string()))?;
    Ok(binary(GRAYMAP_MIME, bytes))
}

async fn correct(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<CorrectionReport>, ApiError> {
    let session = state.get(&id)?;
    let req: CorrectRequest = serde_json::from_slice(&body)
        .map_err(|e| ApiError::bad_request(format!("invalid request: {e}")))?;
    let tags = req
        .tags()
        .map_err(|e| ApiError::bad_request(e.to_string()))?;
    let options = req.options();
    let mut s = session.lock().await;
    match s.correct(&tags, &options) {
        Ok(report) => Ok(Json(report)),
        Err(CorrectionError::Implausible(report)) => {
            Err(ApiError::report(StatusCode::CONFLICT, &report))
        }
        Err(e) if e.is_degenerate() => {
            let measured = tofcorr::correction::measure_tags(&s.current().to_vector(), &tags);
            Err(ApiError::report(
                correction_status(&e),
                &CorrectionReport::failure(measured, &e),
            ))
        }
        Err(e) => Err(ApiError::bad_request(e.to_string())),
    }
}

async fn undo(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> Result<Json<serde_json::Value>, ApiError> {
    let session = state.get(&id)?;
    let mut s = session.lock().await;
    let depth = s
        .undo()
        .ok_or_else(|| ApiError::message(StatusCode::CONFLICT, "nothing to undo"))?;
    Ok(Json(json!({ "history_depth": depth })))
}

async fn segment(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<HashMap<String, String>>,
) -> Result<Response, ApiError> {
    let threshold_mm: f64 = parse_query(&q, "threshold_mm")?
        .ok_or_else(|| ApiError::bad_request("threshold_mm is required"))?;
    let relation: Relation = parse_query(&q, "relation")?.unwrap_or(Relation::CloserThan);
    let session = state.get(&id)?;
    let s = session.lock().await;
    let mask = s
        .segment_preview(SegmentRule::from_mm(threshold_mm, relation))
        .map_err(|e| ApiError::bad_request(e.to_string()))?;
    let mut resp = binary(GRAYMAP_MIME, encode_mask(&mask.mask));
    resp.headers_mut().insert(
        HeaderName::from_static("x-segment-pixels"),
        mask.count().into(),
    );
    Ok(resp)
}

async fn export(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> Result<Response, ApiError> {
    let session = state.get(&id)?;
    let s = session.lock().await;
    Ok(binary(
        TOFC_MIME,
        encode_tofc(&TofcImage::Polar(s.current().clone())),
    ))
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session).delete(delete_session))
        .route("/sessions/{id}/image", get(image))
        .route("/sessions/{id}/correct", post(correct))
        .route("/sessions/{id}/undo", post(undo))
        .route("/sessions/{id}/segment", get(segment))
        .route("/sessions/{id}/export", get(export))
        .layer(DefaultBodyLimit::max(MAX_UPLOAD_BYTES))
        .with_state(state)
}

/// Serves until the process is stopped.
pub async fn serve(addr: SocketAddr, ttl: Duration) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(Arc::new(AppState::new(ttl)))).await
}
