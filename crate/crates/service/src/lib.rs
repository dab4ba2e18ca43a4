//! HTTP+JSON front end for interactive learning sessions.
//!
//! Sessions live in memory. Commands for one session are applied one at a
//! time under its write lock; reads share a read lock and never wait on
//! each other. Commands travel as text in the engine's command grammar.

mod error;

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::IntoResponse;
use axum::routing::{get, post};
use axum::{Json, Router};
use mergeloop::export::{to_document, AutomatonDoc};
use mergeloop::{
    parse_traces, to_dot, write_step_artifacts, Command, Heuristic, HeuristicParams,
    MergeCandidate, Mode, Session,
};
use serde::{Deserialize, Serialize};
use tokio::sync::RwLock;

pub use error::ApiError;

pub const DEFAULT_ADDR: &str = "127.0.0.1:8080";
pub const ADDR_ENV: &str = "MERGELOOP_ADDR";
pub const PAGE_SIZE: usize = 50;
pub const DOT_CONTENT_TYPE: &str = "text/vnd.graphviz";

/// Bind address: explicit flag, else `MERGELOOP_ADDR`, else [`DEFAULT_ADDR`].
pub fn resolve_addr(flag: Option<&str>) -> String {
    flag.map(str::to_owned)
        .or_else(|| std::env::var(ADDR_ENV).ok().filter(|s| !s.is_empty()))
        .unwrap_or_else(|| DEFAULT_ADDR.to_owned())
}

#[derive(Clone, Debug, Default)]
pub struct ServiceConfig {
    /// When set, step artifacts of session `id` are written to `<dir>/<id>/`
    /// after creation and after every successful command.
    pub artifacts_dir: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub heuristic: Heuristic,
    pub mode: Mode,
    pub params: HeuristicParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionHandle {
    pub id: String,
    /// RFC 3339, UTC.
    pub created_at: String,
    pub config: SessionConfig,
}

/// Body of `POST /api/sessions`. `mode` and `heuristic` default to each
/// other; with neither given, Mealy is assumed.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateRequest {
    pub traces: String,
    #[serde(default)]
    pub mode: Option<String>,
    #[serde(default)]
    pub heuristic: Option<String>,
    #[serde(default)]
    pub params: Option<serde_json::Value>,
}

#[derive(Debug, Deserialize)]
pub struct CommandRequest {
    pub command: String,
}

/// Response of the state and command endpoints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateDocument {
    pub id: String,
    pub step: usize,
    pub heuristic: Heuristic,
    pub mode: Mode,
    pub params: HeuristicParams,
    pub automaton: AutomatonDoc,
    /// One page of the ranked list.
    pub candidates: Vec<MergeCandidate>,
    pub candidate_count: usize,
    /// 1-based.
    pub page: usize,
    pub page_size: usize,
    pub page_count: usize,
    /// Trace log: space-separated `m…`, `f…` and `x…` tokens.
    pub history: String,
    pub can_undo: bool,
    pub commands: Vec<String>,
    pub constraints: Vec<(usize, usize)>,
}

impl StateDocument {
    fn of(id: &str, s: &Session, page: usize) -> Self {
        let all = s.candidates();
        let start = (page - 1).saturating_mul(PAGE_SIZE).min(all.len());
        let end = (start + PAGE_SIZE).min(all.len());
        Self {
            id: id.to_owned(),
            step: s.step(),
            heuristic: s.heuristic(),
            mode: s.sample().mode,
            params: *s.params(),
            automaton: to_document(s.automaton()),
            candidates: all[start..end].to_vec(),
            candidate_count: all.len(),
            page,
            page_size: PAGE_SIZE,
            page_count: all.len().div_ceil(PAGE_SIZE),
            history: s.trace_log(),
            can_undo: s.step() > 0,
            commands: s.commands().iter().map(ToString::to_string).collect(),
            constraints: s
                .constraints()
                .representatives(s.automaton())
                .into_iter()
                .collect(),
        }
    }
}

struct Entry {
    handle: SessionHandle,
    session: Arc<RwLock<Session>>,
}

#[derive(Clone, Default)]
pub struct AppState {
    sessions: Arc<RwLock<BTreeMap<String, Arc<Entry>>>>,
    config: Arc<ServiceConfig>,
}

impl AppState {
    pub fn new(config: ServiceConfig) -> Self {
        Self {
            sessions: Default::default(),
            config: Arc::new(config),
        }
    }

    async fn entry(&self, id: &str) -> Result<Arc<Entry>, ApiError> {
        self.sessions
            .read()
            .await
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::UnknownSession(id.to_owned()))
    }

    fn write_through(&self, id: &str, session: &Session) {
        if let Some(dir) = &self.config.artifacts_dir {
            if let Err(e) = write_step_artifacts(session, &dir.join(id)) {
                log::warn!("writing artifacts for session {id}: {e}");
            }
        }
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/sessions", post(create_session).get(list_sessions))
        .route("/api/sessions/{id}", get(get_state).delete(delete_session))
        .route("/api/sessions/{id}/commands", post(post_command))
        .route("/api/sessions/{id}/dot", get(get_dot))
        .with_state(state)
}

/// Serves until the process is stopped.
pub async fn serve(addr: &str, config: ServiceConfig) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    let local: SocketAddr = listener.local_addr()?;
    log::info!("listening on http://{local}");
    axum::serve(listener, router(AppState::new(config))).await
}

fn parse_config(req: &CreateRequest) -> Result<SessionConfig, ApiError> {
    let bad = |e: String| ApiError::BadConfig(e);
    let mode: Option<Mode> = req
        .mode
        .as_deref()
        .map(str::parse)
        .transpose()
        .map_err(bad)?;
    let heuristic: Option<Heuristic> = req
        .heuristic
        .as_deref()
        .map(str::parse)
        .transpose()
        .map_err(bad)?;
    let (mode, heuristic) = match (mode, heuristic) {
        (Some(m), Some(h)) => (m, h),
        (Some(Mode::Dfa), None) => (Mode::Dfa, Heuristic::Edsm),
        (Some(Mode::Mealy), None) | (None, None) => (Mode::Mealy, Heuristic::Mealy),
        (None, Some(h)) => (h.mode(), h),
    };
    if heuristic.mode() != mode {
        return Err(bad(format!(
            "heuristic `{heuristic}` cannot score {mode} samples"
        )));
    }
    let params = match &req.params {
        None => HeuristicParams::default(),
        Some(v) => {
            serde_json::from_value(v.clone()).map_err(|e| bad(format!("invalid params: {e}")))?
        }
    };
    Ok(SessionConfig {
        heuristic,
        mode,
        params,
    })
}

async fn create_session(
    State(app): State<AppState>,
    body: Bytes,
) -> Result<impl IntoResponse, ApiError> {
    let req: CreateRequest = serde_json::from_slice(&body).map_err(|e| {
        if e.is_data() {
            ApiError::BadConfig(e.to_string())
        } else {
            ApiError::BadRequest(format!("malformed JSON body: {e}"))
        }
    })?;
    let config = parse_config(&req)?;
    let sample = parse_traces(&req.traces, config.mode).map_err(|e| ApiError::Parse {
        line: e.line,
        message: e.to_string(),
    })?;
    let cfg = config.clone();
    let session =
        tokio::task::spawn_blocking(move || Session::new(sample, cfg.params, cfg.heuristic))
            .await
            .map_err(|e| ApiError::Internal(e.to_string()))?
            .map_err(|e| ApiError::BadConfig(e.to_string()))?;
    let handle = SessionHandle {
        id: uuid::Uuid::new_v4().simple().to_string(),
        created_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
        config,
    };
    app.write_through(&handle.id, &session);
    let entry = Arc::new(Entry {
        handle: handle.clone(),
        session: Arc::new(RwLock::new(session)),
    });
    app.sessions.write().await.insert(handle.id.clone(), entry);
    Ok((StatusCode::CREATED, Json(handle)))
}

async fn list_sessions(State(app): State<AppState>) -> Json<Vec<SessionHandle>> {
    let sessions = app.sessions.read().await;
    Json(sessions.values().map(|e| e.handle.clone()).collect())
}

#[derive(Debug, Deserialize)]
struct PageQuery {
    page: Option<usize>,
}

async fn get_state(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<PageQuery>,
) -> Result<Json<StateDocument>, ApiError> {
    let entry = app.entry(&id).await?;
    let page = q.page.unwrap_or(1);
    if page == 0 {
        return Err(ApiError::BadRequest("pages are numbered from 1".into()));
    }
    let session = entry.session.read().await;
    Ok(Json(StateDocument::of(&id, &session, page)))
}

async fn post_command(
    State(app): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<StateDocument>, ApiError> {
    let entry = app.entry(&id).await?;
    let req: CommandRequest = serde_json::from_slice(&body)
        .map_err(|e| ApiError::BadRequest(format!("expected {{\"command\": \"...\"}}: {e}")))?;
    let command: Command =
        req.command
            .parse()
            .map_err(|e: mergeloop::session::CommandSyntaxError| {
                ApiError::BadCommandSyntax(e.to_string())
            })?;
    let guard = entry.session.clone().write_owned().await;
    tokio::task::spawn_blocking(move || {
        let mut session = guard;
        session.apply(&command)?;
        app.write_through(&id, &session);
        Ok(Json(StateDocument::of(&id, &session, 1)))
    })
    .await
    .map_err(|e| ApiError::Internal(e.to_string()))?
}

#[derive(Debug, Deserialize)]
struct DotQuery {
    which: Option<String>,
}

async fn get_dot(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<DotQuery>,
) -> Result<impl IntoResponse, ApiError> {
    let entry = app.entry(&id).await?;
    let session = entry.session.read().await;
    let dot = match q.which.as_deref().unwrap_or("current") {
        "current" => to_dot(session.automaton()),
        "previous" => to_dot(&session.previous().ok_or(ApiError::NoPreviousStep)?),
        other => {
            return Err(ApiError::BadRequest(format!(
                "which must be current or previous, not `{other}`"
            )))
        }
    };
    Ok(([(header::CONTENT_TYPE, DOT_CONTENT_TYPE)], dot))
}

async fn delete_session(
    State(app): State<AppState>,
    Path(id): Path<String>,
) -> Result<StatusCode, ApiError> {
    match app.sessions.write().await.remove(&id) {
        Some(_) => Ok(StatusCode::NO_CONTENT),
        None => Err(ApiError::UnknownSession(id)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(mode: Option<&str>, heuristic: Option<&str>) -> CreateRequest {
        CreateRequest {
            traces: String::new(),
            mode: mode.map(Into::into),
            heuristic: heuristic.map(Into::into),
            params: None,
        }
    }

    #[test]
    fn mode_and_heuristic_default_to_each_other() {
        let c = parse_config(&req(None, None)).unwrap();
        assert_eq!((c.mode, c.heuristic), (Mode::Mealy, Heuristic::Mealy));
        let c = parse_config(&req(Some("dfa"), None)).unwrap();
        assert_eq!(c.heuristic, Heuristic::Edsm);
        let c = parse_config(&req(None, Some("edsm"))).unwrap();
        assert_eq!(c.mode, Mode::Dfa);
        assert!(matches!(
            parse_config(&req(Some("dfa"), Some("mealy"))),
            Err(ApiError::BadConfig(_))
        ));
        assert!(matches!(
            parse_config(&req(Some("nfa"), None)),
            Err(ApiError::BadConfig(_))
        ));
    }

    #[test]
    fn partial_params() {
        let mut r = req(None, None);
        r.params = Some(serde_json::json!({"lowerbound": 10}));
        let c = parse_config(&r).unwrap();
        assert_eq!(c.params.lowerbound, 10);
        assert_eq!(c.params.state_count, 0);
        r.params = Some(serde_json::json!({"lowerbound": -1}));
        assert!(parse_config(&r).is_err());
    }

    #[test]
    fn addr_precedence() {
        assert_eq!(resolve_addr(Some("0.0.0.0:1")), "0.0.0.0:1");
    }
}
