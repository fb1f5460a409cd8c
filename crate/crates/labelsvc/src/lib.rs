//! Labeling backend: serves random unlabeled candidate pairs to raters,
//! records their labels durably, and exports consensus ground truth.
//!
//! | Method | Path | |
//! |---|---|---|
//! | GET | `/api/pair?rater=R` | next [`PairPayload`], or 204 when the rater is done |
//! | POST | `/api/label` | `{rater, pair_id, label}` → [`LabelAck`] |
//! | POST | `/api/skip` | `{rater, pair_id}` → 204 |
//! | GET | `/api/progress[?rater=R]` | [`Progress`] |
//! | GET | `/api/export` | consensus truth as JSON lines |
//!
//! Anything else is served from the UI directory when one is configured.

pub mod store;

use std::collections::{BTreeMap, HashMap};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use axum::extract::{Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use clonekit::evaluator::{consensus, CandidatePair, CloneLabel, ConsensusRule, GroundTruth, LabelRecord};
use clonekit::extractor::Method;
use clonekit::io::to_jsonl_string;
use parking_lot::Mutex;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

use store::{SkipRecord, Store};

#[derive(Debug, thiserror::Error)]
pub enum ApiError {
    #[error("rater id is required")]
    MissingRater,
    #[error("unknown pair {0}")]
    UnknownPair(String),
    #[error("invalid label {0:?}; expected one of Type1, Type2, Type3, Type4, NotClone")]
    InvalidLabel(String),
    #[error("storage failure: {0}")]
    Storage(#[from] std::io::Error),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match self {
            ApiError::MissingRater => StatusCode::BAD_REQUEST,
            ApiError::UnknownPair(_) => StatusCode::NOT_FOUND,
            ApiError::InvalidLabel(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ApiError::Storage(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(serde_json::json!({ "error": self.to_string() }))).into_response()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodView {
    pub id: String,
    pub name: String,
    pub file: String,
    pub start_line: usize,
    pub end_line: usize,
    pub raw_body: String,
}

impl From<&Method> for MethodView {
    fn from(m: &Method) -> Self {
        MethodView {
            id: m.id.clone(),
            name: m.name.clone(),
            file: m.file.clone(),
            start_line: m.start_line,
            end_line: m.end_line,
            raw_body: m.raw_body.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeDefinition {
    pub label: CloneLabel,
    pub title: String,
    pub description: String,
}

pub fn clone_type_definitions() -> Vec<TypeDefinition> {
    let def = |label, title: &str, description: &str| TypeDefinition {
        label,
        title: title.into(),
        description: description.into(),
    };
    vec![
        def(CloneLabel::Type1, "Type-1", "Identical code apart from whitespace, layout and comments."),
        def(
            CloneLabel::Type2,
            "Type-2",
            "Structurally identical code where identifier names, literal values or types differ.",
        ),
        def(
            CloneLabel::Type3,
            "Type-3",
            "Copied code with further edits: statements added, removed or changed.",
        ),
        def(
            CloneLabel::Type4,
            "Type-4",
            "Code that computes the same thing through a different syntactic structure.",
        ),
        def(CloneLabel::NotClone, "Not a clone", "The two methods are unrelated."),
    ]
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairPayload {
    pub pair_id: String,
    pub left: MethodView,
    pub right: MethodView,
    pub definitions: Vec<TypeDefinition>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRequest {
    pub rater: String,
    pub pair_id: String,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipRequest {
    pub rater: String,
    pub pair_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelAck {
    pub pair_id: String,
    pub label: CloneLabel,
    /// The rater had already labeled this pair; the old label was replaced.
    pub replaced: bool,
    pub progress: Progress,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    /// Pairs with at least one label.
    pub labeled: usize,
    /// Pairs with a consensus label.
    pub consensus: usize,
    /// Pairs without a consensus label.
    pub remaining: usize,
    pub total: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rater: Option<RaterProgress>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RaterProgress {
    pub labeled: usize,
    pub skipped: usize,
    /// Pairs this rater can still be served.
    pub remaining: usize,
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub data_dir: PathBuf,
    pub ui_dir: Option<PathBuf>,
    /// Serve pairs that already have exactly one label first.
    pub second_rater_first: bool,
    pub seed: u64,
    pub rule: ConsensusRule,
}

impl ServiceConfig {
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        ServiceConfig {
            data_dir: data_dir.into(),
            ui_dir: None,
            second_rater_first: false,
            seed: 0,
            rule: ConsensusRule::default(),
        }
    }
}

struct Inner {
    store: Store,
    rng: ChaCha8Rng,
}

pub struct AppState {
    config: ServiceConfig,
    pairs: Vec<(String, MethodView, MethodView)>,
    pair_index: HashMap<String, usize>,
    inner: Mutex<Inner>,
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

impl AppState {
    /// Candidates whose methods are not in `methods` are dropped with a
    /// warning.
    pub fn new(config: ServiceConfig, candidates: &[CandidatePair], methods: &[Method]) -> std::io::Result<Self> {
        let by_id: HashMap<&str, &Method> = methods.iter().map(|m| (m.id.as_str(), m)).collect();
        let mut pairs = Vec::with_capacity(candidates.len());
        let mut pair_index = HashMap::new();
        for c in candidates {
            let (Some(a), Some(b)) = (by_id.get(c.a.as_str()), by_id.get(c.b.as_str())) else {
                log::warn!("candidate {} refers to an unknown method; skipped", c.id());
                continue;
            };
            let id = c.id();
            if pair_index.contains_key(&id) {
                continue;
            }
            pair_index.insert(id.clone(), pairs.len());
            pairs.push((id, MethodView::from(*a), MethodView::from(*b)));
        }
        let store = Store::open(&config.data_dir)?;
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        Ok(AppState { config, pairs, pair_index, inner: Mutex::new(Inner { store, rng }) })
    }

    pub fn pair_count(&self) -> usize {
        self.pairs.len()
    }

    /// A random pair the rater has neither labeled nor skipped.
    pub fn next_pair(&self, rater: &str) -> Result<Option<PairPayload>, ApiError> {
        if rater.trim().is_empty() {
            return Err(ApiError::MissingRater);
        }
        let mut inner = self.inner.lock();
        let open: Vec<usize> = (0..self.pairs.len())
            .filter(|&i| {
                let id = &self.pairs[i].0;
                !inner.store.has_label(id, rater) && !inner.store.has_skipped(id, rater)
            })
            .collect();
        let pool = if self.config.second_rater_first {
            let mut counts: HashMap<&str, usize> = HashMap::new();
            for r in inner.store.labels() {
                *counts.entry(r.pair_id.as_str()).or_default() += 1;
            }
            let once: Vec<usize> =
                open.iter().copied().filter(|&i| counts.get(self.pairs[i].0.as_str()) == Some(&1)).collect();
            if once.is_empty() {
                open
            } else {
                once
            }
        } else {
            open
        };
        let Some(&i) = pool.choose(&mut inner.rng) else { return Ok(None) };
        let (id, left, right) = &self.pairs[i];
        Ok(Some(PairPayload {
            pair_id: id.clone(),
            left: left.clone(),
            right: right.clone(),
            definitions: clone_type_definitions(),
        }))
    }

    pub fn submit_label(&self, req: &LabelRequest) -> Result<LabelAck, ApiError> {
        if req.rater.trim().is_empty() {
            return Err(ApiError::MissingRater);
        }
        let label: CloneLabel = req.label.parse().map_err(|_| ApiError::InvalidLabel(req.label.clone()))?;
        if !self.pair_index.contains_key(&req.pair_id) {
            return Err(ApiError::UnknownPair(req.pair_id.clone()));
        }
        let mut inner = self.inner.lock();
        let replaced = inner.store.put_label(LabelRecord {
            pair_id: req.pair_id.clone(),
            rater: req.rater.clone(),
            label,
            timestamp: now(),
        })?;
        let progress = self.progress_locked(&inner, Some(&req.rater));
        Ok(LabelAck { pair_id: req.pair_id.clone(), label, replaced, progress })
    }

    pub fn skip(&self, req: &SkipRequest) -> Result<(), ApiError> {
        if req.rater.trim().is_empty() {
            return Err(ApiError::MissingRater);
        }
        if !self.pair_index.contains_key(&req.pair_id) {
            return Err(ApiError::UnknownPair(req.pair_id.clone()));
        }
        let mut inner = self.inner.lock();
        inner.store.put_skip(SkipRecord { pair_id: req.pair_id.clone(), rater: req.rater.clone(), timestamp: now() })?;
        Ok(())
    }

    pub fn progress(&self, rater: Option<&str>) -> Progress {
        let inner = self.inner.lock();
        self.progress_locked(&inner, rater)
    }

    fn progress_locked(&self, inner: &Inner, rater: Option<&str>) -> Progress {
        let labels = inner.store.labels();
        let mut per_pair: BTreeMap<&str, usize> = BTreeMap::new();
        for r in labels {
            *per_pair.entry(r.pair_id.as_str()).or_default() += 1;
        }
        let consensus_count = consensus(labels, self.config.rule).truth.len();
        let rater = rater.filter(|r| !r.trim().is_empty()).map(|r| {
            let labeled = self.pairs.iter().filter(|(id, ..)| inner.store.has_label(id, r)).count();
            let skipped = self
                .pairs
                .iter()
                .filter(|(id, ..)| inner.store.has_skipped(id, r) && !inner.store.has_label(id, r))
                .count();
            RaterProgress { labeled, skipped, remaining: self.pairs.len() - labeled - skipped }
        });
        Progress {
            labeled: per_pair.len(),
            consensus: consensus_count,
            remaining: self.pairs.len().saturating_sub(consensus_count),
            total: self.pairs.len(),
            rater,
        }
    }

    pub fn export_truth(&self) -> Vec<GroundTruth> {
        let inner = self.inner.lock();
        consensus(inner.store.labels(), self.config.rule).truth
    }
}

#[derive(Debug, Deserialize)]
struct RaterQuery {
    rater: Option<String>,
}

async fn get_pair(State(state): State<Arc<AppState>>, Query(q): Query<RaterQuery>) -> Result<Response, ApiError> {
    match state.next_pair(q.rater.as_deref().unwrap_or(""))? {
        Some(p) => Ok(Json(p).into_response()),
        None => Ok(StatusCode::NO_CONTENT.into_response()),
    }
}

async fn post_label(State(state): State<Arc<AppState>>, Json(req): Json<LabelRequest>) -> Result<Json<LabelAck>, ApiError> {
    state.submit_label(&req).map(Json)
}

async fn post_skip(State(state): State<Arc<AppState>>, Json(req): Json<SkipRequest>) -> Result<StatusCode, ApiError> {
    state.skip(&req).map(|_| StatusCode::NO_CONTENT)
}

async fn get_progress(State(state): State<Arc<AppState>>, Query(q): Query<RaterQuery>) -> Json<Progress> {
    Json(state.progress(q.rater.as_deref()))
}

async fn get_export(State(state): State<Arc<AppState>>) -> Response {
    let body = to_jsonl_string(&state.export_truth());
    ([(header::CONTENT_TYPE, "application/x-ndjson")], body).into_response()
}

pub fn router(state: Arc<AppState>) -> Router {
    let api = Router::new()
        .route("/api/pair", get(get_pair))
        .route("/api/label", post(post_label))
        .route("/api/skip", post(post_skip))
        .route("/api/progress", get(get_progress))
        .route("/api/export", get(get_export));
    let api = match &state.config.ui_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    };
    api.with_state(state)
}

/// Bind and serve until Ctrl-C.
pub async fn serve(state: Arc<AppState>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("labeling service on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
