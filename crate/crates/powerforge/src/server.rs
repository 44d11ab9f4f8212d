//! Local HTTP/JSON service with a server-sent event stream for power curves.
//!
//! Each session sits behind its own lock, so updates to one session are
//! applied one at a time while sessions stay independent. Long computations
//! run on the blocking pool against a copy of the inputs; a curve stream
//! stops as soon as the session's epoch moves past the one it started at.

use std::collections::HashMap;
use std::convert::Infallible;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::stream::{self, Stream};
use serde::{Deserialize, Serialize};
use tokio::sync::mpsc;

use powerforge_core::confound::PreviewBar;
use powerforge_core::design::BalanceWarning;
use powerforge_core::history::SnapshotDiff;
use powerforge_core::stats::{PairPower, Tier};
use powerforge_core::{DependentVariableMeta, Error, IndependentVariable, NodeId, PairwiseFrame, SliderRange};

use crate::canonical;
use crate::document::SessionDocument;
use crate::error::AppError;
use crate::parallel;
use crate::session::{PairwiseInputs, Session, Update, UpdateOutcome, UpdateRequest};

pub const DEFAULT_PORT: u16 = 8710;
pub const PORT_VAR: &str = "POWERFORGE_PORT";

type FrameCache = Option<(PairwiseInputs, Arc<Vec<Vec<PairwiseFrame>>>)>;

struct Slot {
    session: Mutex<Session>,
    /// Mirrors the session epoch for lock-free cancellation checks.
    epoch: Arc<AtomicU64>,
    pairwise: Mutex<FrameCache>,
}

#[derive(Default)]
pub struct AppState {
    sessions: Mutex<HashMap<String, Arc<Slot>>>,
    next_id: AtomicU64,
}

impl AppState {
    fn slot(&self, id: &str) -> Result<Arc<Slot>, ApiError> {
        self.sessions
            .lock()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError(AppError::UnknownSession(id.to_string())))
    }

    fn insert(&self, session: Session) -> String {
        let id = format!("s{}", self.next_id.fetch_add(1, Ordering::Relaxed) + 1);
        let slot = Slot {
            epoch: Arc::new(AtomicU64::new(session.epoch())),
            session: Mutex::new(session),
            pairwise: Mutex::new(None),
        };
        self.sessions.lock().unwrap().insert(id.clone(), Arc::new(slot));
        id
    }
}

pub struct ApiError(pub AppError);

impl<E: Into<AppError>> From<E> for ApiError {
    fn from(e: E) -> Self {
        ApiError(e.into())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match &self.0 {
            AppError::UnknownSession(_) | AppError::Core(Error::UnknownNode(_)) => StatusCode::NOT_FOUND,
            AppError::Core(Error::RejectedMove(_)) => StatusCode::CONFLICT,
            e if e.is_validation() => StatusCode::UNPROCESSABLE_ENTITY,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(self.0.to_json())).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// A session plus what the views derive from it.
#[derive(Debug, Serialize, Deserialize)]
pub struct SessionView {
    pub id: String,
    pub epoch: u64,
    pub document: SessionDocument,
    pub slider_ranges: Vec<SliderRange>,
    /// Every pair with its `IV:a-b` label, in canonical order.
    pub pairs: Vec<PairLabel>,
    pub balance_warnings: Vec<BalanceWarning>,
    pub displayed: PairPower,
    pub lower_power_pairs: Vec<PairPower>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PairLabel {
    pub pair: powerforge_core::LevelPair,
    pub label: String,
}

fn view(id: &str, s: &Session) -> ApiResult<SessionView> {
    Ok(SessionView {
        id: id.to_string(),
        epoch: s.epoch(),
        document: s.to_document(),
        slider_ranges: s.slider_ranges(),
        pairs: s
            .all_pairs()
            .into_iter()
            .map(|pair| PairLabel {
                label: pair.label(s.design()),
                pair,
            })
            .collect(),
        balance_warnings: s.balance_warnings(),
        displayed: s.displayed_power()?,
        lower_power_pairs: s.lower_power_pairs()?,
    })
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum CreateRequest {
    New {
        dv_meta: DependentVariableMeta,
        ivs: Vec<IndependentVariable>,
    },
    Document {
        document: Box<SessionDocument>,
    },
    Load {
        path: PathBuf,
    },
}

#[derive(Debug, Serialize, Deserialize)]
pub struct UpdateResponse {
    pub outcome: UpdateOutcome,
    pub session: SessionView,
}

/// One message of the power-curve stream. The final message has `done`
/// set and carries no point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveMessage {
    pub epoch: u64,
    pub tier: Option<Tier>,
    pub x: Option<u32>,
    pub power: Option<f64>,
    pub mc_stderr: Option<f64>,
    pub done: bool,
    /// Set on the final message when a newer update superseded the curve.
    #[serde(default)]
    pub cancelled: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<serde_json::Value>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FramesResponse {
    pub epoch: u64,
    pub pairs: Vec<PairLabel>,
    pub frames: Vec<Vec<PairwiseFrame>>,
    /// Served from the cache without simulating.
    pub cached: bool,
}

#[derive(Debug, Deserialize)]
pub struct MarkRequest {
    pub marked: bool,
}

#[derive(Debug, Deserialize)]
pub struct SaveRequest {
    pub path: PathBuf,
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session).put(put_session))
        .route("/sessions/{id}/updates", post(post_update))
        .route("/sessions/{id}/power-curve", get(power_curve_stream))
        .route("/sessions/{id}/pairwise-frames", get(pairwise_frames))
        .route("/sessions/{id}/confound-preview", get(confound_preview))
        .route("/sessions/{id}/save", post(save_session))
        .route("/sessions/{id}/history/{node}/restore", post(restore_node))
        .route("/sessions/{id}/history/{node}/mark", post(mark_node))
        .route("/sessions/{id}/history/{node}/preview", get(preview_node))
        .with_state(state)
}

async fn create_session(
    State(state): State<Arc<AppState>>,
    Json(req): Json<CreateRequest>,
) -> ApiResult<(StatusCode, Json<SessionView>)> {
    let session = match req {
        CreateRequest::New { dv_meta, ivs } => Session::create(dv_meta, ivs)?,
        CreateRequest::Document { document } => Session::from_document(*document)?,
        CreateRequest::Load { path } => Session::load(&path)?,
    };
    let v = view("", &session)?;
    let id = state.insert(session);
    Ok((StatusCode::CREATED, Json(SessionView { id, ..v })))
}

async fn get_session(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<SessionView>> {
    let slot = state.slot(&id)?;
    let s = slot.session.lock().unwrap();
    Ok(Json(view(&id, &s)?))
}

async fn put_session(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(doc): Json<SessionDocument>,
) -> ApiResult<Json<SessionView>> {
    let slot = state.slot(&id)?;
    let mut replacement = Session::from_document(doc)?;
    let mut s = slot.session.lock().unwrap();
    // Keep epochs monotone across a replacement.
    let epoch = s.epoch() + 1;
    replacement.set_epoch(epoch);
    *s = replacement;
    slot.epoch.store(epoch, Ordering::SeqCst);
    Ok(Json(view(&id, &s)?))
}

fn apply(slot: &Slot, id: &str, req: &UpdateRequest) -> ApiResult<Json<UpdateResponse>> {
    let mut s = slot.session.lock().unwrap();
    let outcome = s.apply(req)?;
    slot.epoch.store(s.epoch(), Ordering::SeqCst);
    Ok(Json(UpdateResponse {
        outcome,
        session: view(id, &s)?,
    }))
}

async fn post_update(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(req): Json<UpdateRequest>,
) -> ApiResult<Json<UpdateResponse>> {
    let slot = state.slot(&id)?;
    apply(&slot, &id, &req)
}

async fn restore_node(
    State(state): State<Arc<AppState>>,
    Path((id, node)): Path<(String, u64)>,
) -> ApiResult<Json<UpdateResponse>> {
    let slot = state.slot(&id)?;
    apply(&slot, &id, &UpdateRequest::transient(Update::Restore { node: NodeId(node) }))
}

async fn mark_node(
    State(state): State<Arc<AppState>>,
    Path((id, node)): Path<(String, u64)>,
    Json(req): Json<MarkRequest>,
) -> ApiResult<Json<UpdateResponse>> {
    let slot = state.slot(&id)?;
    let update = Update::Mark {
        node: NodeId(node),
        marked: req.marked,
    };
    apply(&slot, &id, &UpdateRequest::transient(update))
}

async fn preview_node(
    State(state): State<Arc<AppState>>,
    Path((id, node)): Path<(String, u64)>,
) -> ApiResult<Json<SnapshotDiff>> {
    let slot = state.slot(&id)?;
    let s = slot.session.lock().unwrap();
    let h = s.history();
    Ok(Json(h.preview_diff(h.current(), NodeId(node))?))
}

async fn confound_preview(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> ApiResult<Json<Vec<PreviewBar>>> {
    let slot = state.slot(&id)?;
    let s = slot.session.lock().unwrap();
    Ok(Json(s.confound_preview()?))
}

async fn save_session(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(req): Json<SaveRequest>,
) -> ApiResult<StatusCode> {
    let slot = state.slot(&id)?;
    let text = slot.session.lock().unwrap().to_json()?;
    std::fs::write(&req.path, text)?;
    Ok(StatusCode::NO_CONTENT)
}

async fn pairwise_frames(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> ApiResult<Json<FramesResponse>> {
    let slot = state.slot(&id)?;
    let (inputs, epoch, pairs) = {
        let s = slot.session.lock().unwrap();
        let pairs = s
            .settings()
            .pairwise_pairs
            .iter()
            .map(|&pair| PairLabel {
                label: pair.label(s.design()),
                pair,
            })
            .collect::<Vec<_>>();
        (s.pairwise_inputs(), s.epoch(), pairs)
    };
    let cached = {
        let cache = slot.pairwise.lock().unwrap();
        cache.as_ref().filter(|(k, _)| *k == inputs).map(|(_, f)| f.clone())
    };
    let (frames, was_cached) = match cached {
        Some(f) => (f, true),
        None => {
            let key = inputs.clone();
            let frames = tokio::task::spawn_blocking(move || inputs.compute())
                .await
                .map_err(|e| AppError::Io(std::io::Error::other(e)))??;
            let frames = Arc::new(frames);
            *slot.pairwise.lock().unwrap() = Some((key, frames.clone()));
            (frames, false)
        }
    };
    Ok(Json(FramesResponse {
        epoch,
        pairs,
        frames: frames.as_ref().clone(),
        cached: was_cached,
    }))
}

async fn power_curve_stream(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> ApiResult<Sse<impl Stream<Item = Result<Event, Infallible>>>> {
    let slot = state.slot(&id)?;
    let (req, epoch) = {
        let s = slot.session.lock().unwrap();
        (s.curve_request()?, s.epoch())
    };
    let live = slot.epoch.clone();
    let (tx, rx) = mpsc::channel::<CurveMessage>(64);
    tokio::task::spawn_blocking(move || {
        let stale = || live.load(Ordering::SeqCst) != epoch;
        let cancelled = || stale() || tx.is_closed();
        let mut emit = |p: &powerforge_core::PowerPoint| {
            if !stale() {
                let _ = tx.blocking_send(CurveMessage {
                    epoch,
                    tier: Some(p.tier),
                    x: Some(p.x),
                    power: Some(p.power),
                    mc_stderr: Some(p.mc_stderr),
                    done: false,
                    cancelled: false,
                    error: None,
                });
            }
        };
        let result = parallel::power_curve(&req, &mut emit, &cancelled);
        let (was_cancelled, error) = match result {
            Ok(_) => (stale(), None),
            Err(Error::CancelledByNewerRequest) => (true, None),
            Err(e) => (false, Some(AppError::Core(e).to_json())),
        };
        let _ = tx.blocking_send(CurveMessage {
            epoch,
            tier: None,
            x: None,
            power: None,
            mc_stderr: None,
            done: true,
            cancelled: was_cancelled,
            error,
        });
    });
    let events = stream::unfold(rx, |mut rx| async move {
        let msg = rx.recv().await?;
        let data = canonical::to_line(&msg).unwrap_or_default();
        let kind = if msg.done { "done" } else { "point" };
        Some((Ok(Event::default().event(kind).data(data)), rx))
    });
    Ok(Sse::new(events).keep_alive(KeepAlive::default()))
}

/// Port from `POWERFORGE_PORT`, or the default.
pub fn port_from_env() -> crate::error::Result<u16> {
    match std::env::var(PORT_VAR) {
        Ok(v) => v
            .parse()
            .map_err(|_| AppError::Core(Error::InvalidArgument(format!("{PORT_VAR} must be a port number, got {v}")))),
        Err(_) => Ok(DEFAULT_PORT),
    }
}

pub fn serve_from_env() -> crate::error::Result<()> {
    let port = port_from_env()?;
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(("127.0.0.1", port)).await?;
        eprintln!("powerforge listening on http://127.0.0.1:{port}");
        axum::serve(listener, router(Arc::new(AppState::default()))).await?;
        Ok(())
    })
}
