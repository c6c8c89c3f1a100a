//! HTTP survey API.
//!
//! Every route shares one [`AppState`]. Corpus and engine sit behind a
//! single mutex, so session issuance and vote recording are serialized.

use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use tower_http::cors::{Any, CorsLayer};
use tower_http::services::ServeDir;

use perceptmap_core::scoring::{emit_map, score_zone, SourceFilter};
use perceptmap_core::store::{append_vote, Corpus, DataPaths, VoteStats};
use perceptmap_core::survey::{Click, PolicyConfig, SurveyEngine, SurveyError};

pub type Clock = Arc<dyn Fn() -> DateTime<Utc> + Send + Sync>;

#[derive(Clone, Debug)]
pub struct ApiConfig {
    pub data_dir: PathBuf,
    pub policy: PolicyConfig,
    pub seed: u64,
    /// Serve pairs from this zone only.
    pub zone: Option<String>,
    /// Directory with the survey UI's static files, served at `/`.
    pub static_dir: Option<PathBuf>,
}

impl ApiConfig {
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        Self { data_dir: data_dir.into(), policy: PolicyConfig::default(), seed: 0, zone: None, static_dir: None }
    }
}

struct Survey {
    corpus: Corpus,
    engine: SurveyEngine,
}

pub struct AppState {
    survey: Mutex<Survey>,
    paths: DataPaths,
    data_dir: PathBuf,
    clock: Clock,
}

impl AppState {
    /// Loads the corpus from the data directory and primes a survey engine.
    pub fn open(cfg: &ApiConfig) -> anyhow::Result<Self> {
        let dir = &cfg.data_dir;
        anyhow::ensure!(dir.is_dir(), "data directory {} does not exist", dir.display());
        let paths = DataPaths::in_dir(dir);
        // opening the log for append checks that the directory is writable
        std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&paths.votes)
            .map_err(|e| anyhow::anyhow!("{} is not writable: {e}", paths.votes.display()))?;
        let corpus = Corpus::load(&paths)?;
        let mut engine = SurveyEngine::new(&corpus, cfg.policy.clone(), cfg.seed)?;
        if let Some(zone) = &cfg.zone {
            engine = engine.restrict_to_zone(zone.clone());
        }
        Ok(Self {
            survey: Mutex::new(Survey { corpus, engine }),
            paths,
            data_dir: dir.clone(),
            clock: Arc::new(Utc::now),
        })
    }

    pub fn with_clock(mut self, clock: Clock) -> Self {
        self.clock = clock;
        self
    }

    fn image_url(&self, uri: &str) -> String {
        if uri.starts_with("http://") || uri.starts_with("https://") {
            return uri.to_owned();
        }
        let path = Path::new(uri);
        let rel = if path.is_absolute() { path.strip_prefix(&self.data_dir).unwrap_or(path) } else { path };
        let rel = rel.to_string_lossy().replace('\\', "/");
        format!("/media/{}", rel.trim_start_matches('/'))
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ImageRef {
    pub image_id: String,
    pub image_url: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PairResponse {
    pub session_id: String,
    pub left: ImageRef,
    pub right: ImageRef,
    pub expires_at: DateTime<Utc>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct VoteRequest {
    pub session_id: String,
    pub click: Click,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct VoteResponse {
    pub vote_id: String,
    pub code: u8,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
}

fn error(status: StatusCode, kind: &str, message: impl Into<String>) -> Response {
    (status, Json(ErrorBody { error: kind.to_owned(), message: message.into() })).into_response()
}

fn survey_error(e: SurveyError) -> Response {
    let msg = e.to_string();
    match e {
        SurveyError::Exhausted => error(StatusCode::CONFLICT, "exhausted", msg),
        SurveyError::UnknownSession(_) => error(StatusCode::NOT_FOUND, "unknown_session", msg),
        SurveyError::Expired(_) => error(StatusCode::NOT_FOUND, "expired_session", msg),
        SurveyError::AlreadyVoted(_) => error(StatusCode::CONFLICT, "already_voted", msg),
        SurveyError::InvalidPolicy(_) | SurveyError::Store(_) => store_error(msg),
    }
}

fn store_error(message: impl Into<String>) -> Response {
    let message = message.into();
    log::error!("store failure: {message}");
    error(StatusCode::INTERNAL_SERVER_ERROR, "store", message)
}

type Shared = Arc<AppState>;

async fn get_pair(State(app): State<Shared>) -> Response {
    let now = (app.clock)();
    let mut guard = app.survey.lock().expect("survey lock poisoned");
    let Survey { corpus, engine } = &mut *guard;
    match engine.next_pair(corpus, now) {
        Ok(s) => {
            let image = |id: &str| ImageRef {
                image_id: id.to_owned(),
                image_url: app.image_url(corpus.image(id).map_or("", |i| i.uri.as_str())),
            };
            Json(PairResponse {
                left: image(&s.left_id),
                right: image(&s.right_id),
                session_id: s.session_id,
                expires_at: s.expires_at,
            })
            .into_response()
        }
        Err(e) => survey_error(e),
    }
}

async fn post_vote(State(app): State<Shared>, body: Result<Json<VoteRequest>, JsonRejection>) -> Response {
    let Json(req) = match body {
        Ok(b) => b,
        Err(e) => return error(StatusCode::BAD_REQUEST, "malformed_body", e.body_text()),
    };
    let now = (app.clock)();
    let mut guard = app.survey.lock().expect("survey lock poisoned");
    let Survey { corpus, engine } = &mut *guard;
    let vote = match engine.prepare_vote(&req.session_id, req.click, now) {
        Ok(v) => v,
        Err(e) => return survey_error(e),
    };
    if let Err(e) = append_vote(&app.paths.votes, &vote) {
        return store_error(e.to_string());
    }
    let response = VoteResponse { vote_id: vote.vote_id.clone(), code: vote.code.into() };
    match engine.commit_vote(corpus, vote) {
        Ok(()) => Json(response).into_response(),
        Err(e) => survey_error(e),
    }
}

async fn get_stats(State(app): State<Shared>) -> Json<VoteStats> {
    Json(app.survey.lock().expect("survey lock poisoned").corpus.stats())
}

#[derive(Debug, Deserialize)]
struct MapQuery {
    source: Option<String>,
}

async fn get_map(State(app): State<Shared>, UrlPath(zone): UrlPath<String>, Query(q): Query<MapQuery>) -> Response {
    let filter: SourceFilter = match q.source.as_deref().map(str::parse).transpose() {
        Ok(f) => f.unwrap_or_default(),
        Err(msg) => return error(StatusCode::BAD_REQUEST, "bad_source", msg),
    };
    let guard = app.survey.lock().expect("survey lock poisoned");
    if guard.corpus.images_in_zone(&zone).next().is_none() {
        return error(StatusCode::NOT_FOUND, "unknown_zone", format!("no zone named {zone:?}"));
    }
    let scored = score_zone(&guard.corpus, &zone, filter);
    drop(guard);
    match emit_map(&zone, &scored) {
        Ok(map) => {
            let body = serde_json::to_vec(&map).expect("maps serialize to JSON");
            ([(header::CONTENT_TYPE, HeaderValue::from_static("application/geo+json"))], body).into_response()
        }
        Err(e) => error(StatusCode::NOT_FOUND, "not_scored", e.to_string()),
    }
}

/// Builds the router: `/api/*`, image files under `/media`, and the survey
/// UI at `/` when a static directory is configured.
pub fn router(state: AppState, static_dir: Option<&Path>) -> Router {
    let media = ServeDir::new(&state.data_dir);
    let cors = CorsLayer::new()
        .allow_origin(Any)
        .allow_methods([Method::GET, Method::POST])
        .allow_headers([header::CONTENT_TYPE]);
    let mut app = Router::new()
        .route("/api/pair", get(get_pair))
        .route("/api/vote", post(post_vote))
        .route("/api/stats", get(get_stats))
        .route("/api/map/{zone}", get(get_map))
        .nest_service("/media", media)
        .with_state(Arc::new(state));
    if let Some(dir) = static_dir {
        app = app.fallback_service(ServeDir::new(dir));
    }
    app.layer(cors)
}

/// Binds and serves until Ctrl-C.
pub async fn serve(cfg: ApiConfig, bind: &str) -> anyhow::Result<()> {
    let state = AppState::open(&cfg)?;
    let app = router(state, cfg.static_dir.as_deref());
    let listener = tokio::net::TcpListener::bind(bind).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
