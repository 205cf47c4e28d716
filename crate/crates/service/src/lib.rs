//! JSON-over-HTTP sessions for stepping through a superhedging strategy
//! one node at a time.

use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::extract::{Path as UrlPath, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use conehedge::geometry::{dot, max_abs, Vector};
use conehedge::input::{self, ClaimInput, MarketInput};
use conehedge::market::MarketTree;
use conehedge::payoffs::Claim;
use conehedge::shp::{shp_backward, ShpResult};
use conehedge::strategy::{self, Frontier, StepContext, StepRecord, StrategyState};
use conehedge::Error;
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tower_http::cors::CorsLayer;

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> ApiError {
        ApiError { status, code, message: message.into() }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({"error": {"code": self.code, "message": self.message}}))).into_response()
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> ApiError {
        let (status, code) = match &e {
            Error::InvalidInput(_) | Error::DimensionMismatch(_) => (StatusCode::BAD_REQUEST, "invalid_input"),
            Error::Arbitrage => (StatusCode::UNPROCESSABLE_ENTITY, "arbitrage"),
            Error::StaleFrontier(_) => (StatusCode::CONFLICT, "stale_version"),
            Error::InvariantViolation(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invariant_violation"),
            _ => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        ApiError::new(status, code, e.to_string())
    }
}

impl From<input::ParseError> for ApiError {
    fn from(e: input::ParseError) -> ApiError {
        ApiError::new(StatusCode::BAD_REQUEST, "malformed_json", e.to_string())
    }
}

type ApiResult<T> = Result<T, ApiError>;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateRequest {
    pub market: Value,
    pub claim: Value,
    pub x0: Vector,
    /// Asset the withdrawals are paid in when `y` is absent.
    #[serde(default)]
    pub asset: Option<usize>,
    #[serde(default)]
    pub y: Option<Vector>,
    #[serde(default)]
    pub gamma: Option<Vector>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Custom {
    pub alpha: f64,
    pub z: Vector,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChooseRequest {
    pub version: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frontier_index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub custom: Option<Custom>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub next_node: Option<usize>,
    /// Draw the successor by branch probability instead of naming it.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub simulate: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
enum Event {
    Create { session_id: String, request: CreateRequest },
    Choose { session_id: String, request: ChooseRequest },
}

struct Session {
    id: String,
    tree: MarketTree,
    claim: Claim,
    shp: ShpResult,
    y: Vector,
    gamma: Option<Vector>,
    state: StrategyState,
    frontier: Option<Frontier>,
    created_ms: u128,
    updated_ms: u128,
}

fn now_ms() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0)
}

#[derive(Debug, Clone, Serialize)]
pub struct SetView {
    pub points: Vec<Vector>,
    pub rays: Vec<Vector>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StateView {
    pub session_id: String,
    pub version: u64,
    pub node: usize,
    pub t: usize,
    pub finished: bool,
    pub v: Vector,
    pub withdrawals: Vector,
    pub total_alpha: f64,
    pub y: Vector,
    pub history: Vec<StepRecord>,
    pub successors: Vec<usize>,
    pub successor_probs: Vec<f64>,
    pub shp: BTreeMap<usize, SetView>,
    pub created_ms: u128,
    pub updated_ms: u128,
}

impl Session {
    fn create(id: String, req: &CreateRequest) -> ApiResult<Session> {
        let market: MarketInput = input::parse_market(req.market.clone()).map_err(|e| prefix(e, "/market"))?;
        let claim: ClaimInput = input::parse_claim(req.claim.clone()).map_err(|e| prefix(e, "/claim"))?;
        let tree = market.tree()?;
        let claim = claim.claim(&tree)?;
        let d = tree.d;
        if req.x0.len() != d || req.x0.iter().any(|v| !v.is_finite()) {
            return Err(ApiError::new(StatusCode::BAD_REQUEST, "invalid_input", format!("x0 must have {d} finite entries")));
        }
        let y = match (&req.y, req.asset) {
            (Some(y), _) => y.clone(),
            (None, a) => {
                let a = a.unwrap_or(tree.numeraire);
                if a >= d {
                    return Err(ApiError::new(StatusCode::BAD_REQUEST, "invalid_input", format!("asset {a} out of range")));
                }
                let mut e = vec![0.0; d];
                e[a] = 1.0;
                e
            }
        };
        if y.len() != d || y.iter().any(|v| !v.is_finite() || *v < 0.0) || max_abs(&y) == 0.0 {
            return Err(ApiError::new(StatusCode::BAD_REQUEST, "invalid_input", "y must be nonnegative and nonzero"));
        }
        let shp = shp_backward(&tree, &claim)?;
        let ctx = StepContext { tree: &tree, claim: &claim, shp: &shp };
        let state = match StrategyState::new(ctx, &req.x0) {
            Ok(s) => s,
            Err(Error::InvalidInput(_)) => {
                let dist = distance_outside(&shp, &tree, &req.x0);
                return Err(ApiError::new(
                    StatusCode::CONFLICT,
                    "not_superhedging",
                    format!("x0 is not in the root superhedging set (largest normalized violation {dist:.6e})"),
                ));
            }
            Err(e) => return Err(e.into()),
        };
        let t = now_ms();
        Ok(Session { id, tree, claim, shp, y, gamma: req.gamma.clone(), state, frontier: None, created_ms: t, updated_ms: t })
    }

    fn ctx(&self) -> StepContext<'_> {
        StepContext { tree: &self.tree, claim: &self.claim, shp: &self.shp }
    }

    fn gamma(&self) -> Vector {
        match &self.gamma {
            Some(g) => g.clone(),
            None => strategy::default_gamma(&self.tree, self.state.node),
        }
    }

    fn frontier(&mut self) -> ApiResult<Frontier> {
        if self.state.finished {
            return Err(ApiError::new(StatusCode::GONE, "gone", "the strategy has reached the horizon"));
        }
        if let Some(f) = &self.frontier {
            if f.version == self.state.version {
                return Ok(f.clone());
            }
        }
        let f = strategy::bicriteria_frontier(self.ctx(), &self.state, &self.y, &self.gamma())?;
        self.frontier = Some(f.clone());
        Ok(f)
    }

    /// Applies a choice; `req.next_node` is filled in when simulated so the
    /// journal replays deterministically.
    fn choose(&mut self, req: &mut ChooseRequest) -> ApiResult<()> {
        if self.state.finished {
            return Err(ApiError::new(StatusCode::GONE, "gone", "the strategy has reached the horizon"));
        }
        if req.version != self.state.version {
            return Err(ApiError::new(StatusCode::CONFLICT, "stale_version", format!("state is at version {}, request was for {}", self.state.version, req.version)));
        }
        let node = self.tree.node(self.state.node);
        if req.simulate && req.next_node.is_none() && !node.is_terminal() {
            let u: f64 = rand::thread_rng().gen();
            let mut acc = 0.0;
            let mut pick = *node.succ.last().expect("interior node has successors");
            for (c, p) in node.succ.iter().zip(&node.succ_probs) {
                acc += p;
                if u < acc {
                    pick = *c;
                    break;
                }
            }
            req.next_node = Some(pick);
        }
        if !node.is_terminal() && req.next_node.is_none() {
            return Err(ApiError::new(StatusCode::BAD_REQUEST, "invalid_input", "next_node is required before the horizon"));
        }
        let (frontier, index) = match (&req.custom, req.frontier_index) {
            (Some(c), None) => {
                let p = strategy::custom_point(self.ctx(), &self.state, &self.y, &self.gamma(), c.alpha, &c.z)?;
                (Frontier { node: self.state.node, version: self.state.version, points: vec![p] }, 0)
            }
            (None, Some(i)) => {
                let f = self.frontier()?;
                if i >= f.points.len() {
                    return Err(ApiError::new(StatusCode::BAD_REQUEST, "invalid_index", format!("frontier has {} points, index {i} requested", f.points.len())));
                }
                (f, i)
            }
            _ => return Err(ApiError::new(StatusCode::BAD_REQUEST, "invalid_input", "give exactly one of frontier_index and custom")),
        };
        let next = strategy::advance(self.ctx(), &self.state, &frontier, index, &self.y, req.next_node)?;
        if next.version != self.state.version + 1 {
            return Err(ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", "version did not advance by one"));
        }
        self.state = next;
        self.frontier = None;
        self.updated_ms = now_ms();
        Ok(())
    }

    fn view(&self) -> StateView {
        let node = self.tree.node(self.state.node);
        let mut shp = BTreeMap::new();
        for id in std::iter::once(&self.state.node).chain(node.succ.iter()) {
            let s = self.shp.set(*id);
            shp.insert(*id, SetView { points: s.points().clone(), rays: s.rays().clone() });
        }
        StateView {
            session_id: self.id.clone(),
            version: self.state.version,
            node: self.state.node,
            t: node.t,
            finished: self.state.finished,
            v: self.state.v.clone(),
            withdrawals: self.state.withdrawals.clone(),
            total_alpha: self.state.total_alpha(),
            y: self.y.clone(),
            history: self.state.history.clone(),
            successors: if self.state.finished { Vec::new() } else { node.succ.clone() },
            successor_probs: if self.state.finished { Vec::new() } else { node.succ_probs.clone() },
            shp,
            created_ms: self.created_ms,
            updated_ms: self.updated_ms,
        }
    }
}

fn prefix(e: input::ParseError, p: &str) -> input::ParseError {
    input::ParseError { pointer: format!("{p}{}", e.pointer), message: e.message }
}

/// Largest violation of the root H-representation, rows scaled to unit
/// max-norm.
fn distance_outside(shp: &ShpResult, tree: &MarketTree, x: &[f64]) -> f64 {
    let h = shp.root(tree).hrep();
    h.a.iter().zip(&h.b).map(|(a, b)| (b - dot(a, x)) / max_abs(a).max(1e-300)).fold(0.0, f64::max)
}

/// Shared server state: the session table and the optional journal.
pub struct AppState {
    sessions: Mutex<HashMap<String, Arc<Mutex<Session>>>>,
    journal: Option<Mutex<File>>,
}

impl AppState {
    pub fn in_memory() -> Arc<AppState> {
        Arc::new(AppState { sessions: Mutex::new(HashMap::new()), journal: None })
    }

    /// Replays `path` if it exists, then appends every accepted request to it.
    pub fn with_journal(path: &Path) -> std::io::Result<Arc<AppState>> {
        let mut sessions = HashMap::new();
        if path.exists() {
            for (n, line) in BufReader::new(File::open(path)?).lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let ev: Event = serde_json::from_str(&line).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, format!("journal line {}: {e}", n + 1)))?;
                let bad = |e: ApiError| std::io::Error::new(std::io::ErrorKind::InvalidData, format!("journal line {}: {}", n + 1, e.message));
                match ev {
                    Event::Create { session_id, request } => {
                        let s = Session::create(session_id.clone(), &request).map_err(bad)?;
                        sessions.insert(session_id, Arc::new(Mutex::new(s)));
                    }
                    Event::Choose { session_id, mut request } => {
                        let s = sessions.get(&session_id).ok_or_else(|| bad(ApiError::new(StatusCode::NOT_FOUND, "not_found", "unknown session")))?;
                        s.lock().expect("session lock").choose(&mut request).map_err(bad)?;
                    }
                }
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Arc::new(AppState { sessions: Mutex::new(sessions), journal: Some(Mutex::new(file)) }))
    }

    fn record(&self, ev: &Event) {
        if let Some(j) = &self.journal {
            let mut f = j.lock().expect("journal lock");
            let line = serde_json::to_string(ev).expect("events serialize");
            if let Err(e) = writeln!(f, "{line}").and_then(|_| f.flush()) {
                log::error!("journal write failed: {e}");
            }
        }
    }

    fn session(&self, id: &str) -> ApiResult<Arc<Mutex<Session>>> {
        self.sessions
            .lock()
            .expect("session table lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "not_found", format!("no session {id}")))
    }
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
}

async fn create_session(State(app): State<Arc<AppState>>, body: String) -> ApiResult<(StatusCode, Json<Value>)> {
    let req: CreateRequest = input::from_str(&body)?;
    let id = uuid::Uuid::new_v4().to_string();
    let app2 = app.clone();
    blocking(move || {
        let mut s = Session::create(id.clone(), &req)?;
        let frontier = s.frontier()?;
        let view = s.view();
        app2.sessions.lock().expect("session table lock").insert(id.clone(), Arc::new(Mutex::new(s)));
        app2.record(&Event::Create { session_id: id.clone(), request: req });
        Ok((StatusCode::CREATED, Json(json!({"session_id": id, "state": view, "root_frontier": frontier}))))
    })
    .await
}

async fn get_frontier(State(app): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<Frontier>> {
    let s = app.session(&id)?;
    blocking(move || Ok(Json(s.lock().expect("session lock").frontier()?))).await
}

async fn choose(State(app): State<Arc<AppState>>, UrlPath(id): UrlPath<String>, body: String) -> ApiResult<Json<StateView>> {
    let mut req: ChooseRequest = input::from_str(&body)?;
    let s = app.session(&id)?;
    blocking(move || {
        let mut guard = s.lock().expect("session lock");
        guard.choose(&mut req)?;
        app.record(&Event::Choose { session_id: id, request: req });
        Ok(Json(guard.view()))
    })
    .await
}

async fn get_state(State(app): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<StateView>> {
    let s = app.session(&id)?;
    let view = s.lock().expect("session lock").view();
    Ok(Json(view))
}

async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint")
}

pub fn router(app: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/frontier", get(get_frontier))
        .route("/sessions/{id}/choose", post(choose))
        .route("/sessions/{id}/state", get(get_state))
        .fallback(not_found)
        .layer(CorsLayer::permissive())
        .with_state(app)
}

/// Serve until the process is stopped.
pub async fn serve(addr: SocketAddr, journal: Option<PathBuf>) -> std::io::Result<()> {
    let app = match journal {
        Some(p) => AppState::with_journal(&p)?,
        None => AppState::in_memory(),
    };
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(app)).await
}
