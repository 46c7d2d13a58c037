//! HTTP service for annotation sessions: seed quads on a frame, propagate them
//! in a background job, correct mid-sequence and export the document.

mod session;

use std::collections::HashMap;
use std::fmt::Display;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use e2vts_core::annotation::{Annotation, Source};
use e2vts_core::autolabel::{PropagateParams, Quad};
use e2vts_core::io::encode_png;
use serde::Deserialize;
use serde_json::json;

pub use session::{Job, JobState, Session, SessionState};

/// Error response body: `{"reason": "<machine code>", "message": "..."}`.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub reason: &'static str,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, reason: &'static str, message: impl Display) -> Self {
        Self { status, reason, message: message.to_string() }
    }

    pub fn bad_request(reason: &'static str, message: impl Display) -> Self {
        Self::new(StatusCode::BAD_REQUEST, reason, message)
    }

    pub fn not_found(reason: &'static str, message: impl Display) -> Self {
        Self::new(StatusCode::NOT_FOUND, reason, message)
    }

    pub fn conflict(reason: &'static str, message: impl Display) -> Self {
        Self::new(StatusCode::CONFLICT, reason, message)
    }

    pub fn internal(message: impl Display) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "reason": self.reason, "message": self.message }))).into_response()
    }
}

/// Response header carrying the session revision an export was taken at.
pub const REVISION_HEADER: &str = "x-revision";

type ApiResult<T> = Result<T, ApiError>;

pub struct AppState {
    root: PathBuf,
    params: PropagateParams,
    sessions: RwLock<HashMap<String, Arc<Session>>>,
}

impl AppState {
    /// Opens the data directory, reloading every session persisted in it.
    /// Directories that fail to load are reported and skipped.
    pub fn open(root: &Path, params: PropagateParams) -> std::io::Result<Arc<Self>> {
        std::fs::create_dir_all(root)?;
        let mut sessions = HashMap::new();
        for entry in std::fs::read_dir(root)? {
            let dir = entry?.path();
            if !dir.join("session.json").is_file() {
                continue;
            }
            match Session::load(&dir) {
                Ok(s) => {
                    sessions.insert(s.id.clone(), s);
                }
                Err(e) => eprintln!("skipping session {}: {e}", dir.display()),
            }
        }
        Ok(Arc::new(Self { root: root.to_path_buf(), params, sessions: RwLock::new(sessions) }))
    }

    pub fn session(&self, id: &str) -> ApiResult<Arc<Session>> {
        self.sessions
            .read()
            .expect("session table")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found("unknown_session", format!("no session {id}")))
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/sessions", post(create_session))
        .route("/api/sessions/{id}", get(get_session))
        .route("/api/sessions/{id}/frames/{i}", get(get_frame))
        .route("/api/sessions/{id}/frames/{i}/annotations", put(put_annotations))
        .route("/api/sessions/{id}/propagate", post(propagate))
        .route("/api/sessions/{id}/jobs/{jid}", get(get_job))
        .route("/api/sessions/{id}/export", get(export))
        .with_state(state)
}

pub async fn serve(addr: SocketAddr, state: Arc<AppState>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(state)).await
}

fn parse_body<'a, T: Deserialize<'a>>(body: &'a [u8]) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request("invalid_body", e))
}

fn parse_index(raw: &str) -> ApiResult<usize> {
    raw.parse().map_err(|_| ApiError::bad_request("invalid_index", format!("{raw:?} is not a frame index")))
}

#[derive(Deserialize)]
struct CreateRequest {
    frames: PathBuf,
}

async fn create_session(State(app): State<Arc<AppState>>, body: Bytes) -> ApiResult<impl IntoResponse> {
    let req: CreateRequest = parse_body(&body)?;
    let app2 = app.clone();
    let session = tokio::task::spawn_blocking(move || Session::create(&app2.root, &req.frames))
        .await
        .map_err(ApiError::internal)??;
    let body = json!({ "id": session.id, "frame_count": session.frame_count(), "revision": 0 });
    app.sessions.write().expect("session table").insert(session.id.clone(), session);
    Ok((StatusCode::CREATED, Json(body)))
}

async fn get_session(State(app): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<impl IntoResponse> {
    let s = app.session(&id)?;
    let st = s.snapshot();
    Ok(Json(json!({
        "id": s.id,
        "source": s.source,
        "frame_count": s.frame_count(),
        "revision": st.revision,
        "running_job": st.running,
        "jobs": st.jobs.values().collect::<Vec<_>>(),
        "document": st.document,
    })))
}

async fn get_frame(State(app): State<Arc<AppState>>, UrlPath((id, i)): UrlPath<(String, String)>) -> ApiResult<impl IntoResponse> {
    let s = app.session(&id)?;
    let i = parse_index(&i)?;
    if i >= s.frame_count() {
        return Err(ApiError::not_found("frame_out_of_range", format!("frame {i} of {}", s.frame_count())));
    }
    let png = tokio::task::spawn_blocking(move || s.frames().load(i).and_then(|f| encode_png(&f)))
        .await
        .map_err(ApiError::internal)?
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "decode_failed", e))?;
    Ok(([(header::CONTENT_TYPE, "image/png")], png))
}

#[derive(Deserialize)]
struct AnnotationInput {
    track_id: u64,
    quad: Quad,
    label: Option<String>,
    #[serde(default)]
    transcription: Option<String>,
}

#[derive(Deserialize)]
struct AnnotationsRequest {
    annotations: Vec<AnnotationInput>,
    /// Rejects the write when the session moved past this revision.
    #[serde(default)]
    revision: Option<u64>,
}

async fn put_annotations(
    State(app): State<Arc<AppState>>,
    UrlPath((id, i)): UrlPath<(String, String)>,
    body: Bytes,
) -> ApiResult<impl IntoResponse> {
    let s = app.session(&id)?;
    let i = parse_index(&i)?;
    let req: AnnotationsRequest = parse_body(&body)?;
    let annotations = req
        .annotations
        .into_iter()
        .map(|a| Annotation { track_id: a.track_id, quad: a.quad, label: a.label, source: Source::Human, transcription: a.transcription })
        .collect();
    let revision = s.set_annotations(i, annotations, req.revision)?;
    Ok(Json(json!({ "revision": revision })))
}

#[derive(Deserialize)]
struct PropagateRequest {
    from: usize,
    to: usize,
}

async fn propagate(State(app): State<Arc<AppState>>, UrlPath(id): UrlPath<String>, body: Bytes) -> ApiResult<impl IntoResponse> {
    let s = app.session(&id)?;
    let req: PropagateRequest = parse_body(&body)?;
    let (job, seeds) = s.start_job(req.from, req.to)?;
    let params = app.params;
    let body = json!({ "job_id": job.id, "job": job });
    tokio::task::spawn_blocking(move || s.run_job(&job, &seeds, &params));
    Ok((StatusCode::ACCEPTED, Json(body)))
}

async fn get_job(State(app): State<Arc<AppState>>, UrlPath((id, jid)): UrlPath<(String, String)>) -> ApiResult<impl IntoResponse> {
    let s = app.session(&id)?;
    let st = s.snapshot();
    let job = st.jobs.get(&jid).ok_or_else(|| ApiError::not_found("unknown_job", format!("no job {jid}")))?;
    Ok(Json(job.clone()))
}

async fn export(State(app): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<impl IntoResponse> {
    let s = app.session(&id)?;
    let st = s.snapshot();
    Ok(([(REVISION_HEADER, st.revision.to_string())], Json(st.document.exported())))
}
