//! JSON analysis service.
//!
//! | Method | Path | Body / query | Reply |
//! |---|---|---|---|
//! | POST | `/game` | `{"size"?, "humanColor"?}` | `{"id", "toMove", "size", "reply"?}` |
//! | POST | `/game/{id}/move` | `{"row", "col"}` | move, engine reply, evaluation |
//! | GET | `/game/{id}/analysis` | `?budget=N&top=K` | value triple, top-k policy, PV |
//! | POST | `/game/{id}/undo` | | position after undoing the last human move |
//!
//! Unknown games are 404, malformed requests 400, and moves or undos the
//! position does not allow are 409 with the game left unchanged.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::board::{Board, Color, GameOutcome, Move, MAX_SIZE, MIN_SIZE};
use crate::config::{ConfigError, EngineConfig};
use crate::eval::Model;
use crate::search::{Limits, SearchResult, Searcher};

/// Largest accepted analysis budget.
pub const MAX_BUDGET: u64 = 1_000_000;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("no game with id {0}")]
    NotFound(u64),
    #[error("{0}")]
    BadRequest(String),
    #[error("{0}")]
    Conflict(String),
    #[error("engine failure: {0}")]
    Engine(String),
}

impl ServiceError {
    fn status(&self) -> StatusCode {
        match self {
            ServiceError::NotFound(_) => StatusCode::NOT_FOUND,
            ServiceError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ServiceError::Conflict(_) => StatusCode::CONFLICT,
            ServiceError::Engine(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        (self.status(), Json(json!({ "error": self.to_string() }))).into_response()
    }
}

type Result<T> = std::result::Result<T, ServiceError>;

struct Game {
    board: Board,
    human: Color,
    searcher: Box<dyn Searcher>,
}

struct Inner {
    config: EngineConfig,
    model: Option<Arc<Model>>,
    games: Mutex<HashMap<u64, Arc<Mutex<Game>>>>,
    next_id: Mutex<u64>,
}

/// Shared service state; cheap to clone.
#[derive(Clone)]
pub struct AppState(Arc<Inner>);

impl AppState {
    /// Loads the model once; every game shares it.
    pub fn new(config: EngineConfig) -> std::result::Result<AppState, ConfigError> {
        config.validate()?;
        let model = match config.evaluator {
            crate::config::EvaluatorKind::Mixnet => Some(config.load_model()?),
            crate::config::EvaluatorKind::Shape => None,
        };
        Ok(AppState(Arc::new(Inner {
            config,
            model,
            games: Mutex::new(HashMap::new()),
            next_id: Mutex::new(1),
        })))
    }

    fn game(&self, id: u64) -> Result<Arc<Mutex<Game>>> {
        self.0
            .games
            .lock()
            .expect("games lock")
            .get(&id)
            .cloned()
            .ok_or(ServiceError::NotFound(id))
    }

    fn move_limits(&self) -> Limits {
        let cfg = &self.0.config;
        let mut limits = Limits::default().with_time(cfg.time.move_budget(None, 0));
        if cfg.backend == crate::config::Backend::Mcts {
            limits.playouts = Some(20_000);
        }
        limits
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Point {
    pub row: usize,
    pub col: usize,
}

impl From<Move> for Point {
    fn from(m: Move) -> Point {
        Point {
            row: m.row(),
            col: m.col(),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct NewGame {
    size: Option<usize>,
    human_color: Option<Color>,
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
struct GameView {
    id: u64,
    size: usize,
    to_move: Color,
    outcome: &'static str,
    moves: Vec<Point>,
    #[serde(skip_serializing_if = "Option::is_none")]
    reply: Option<Point>,
    #[serde(skip_serializing_if = "Option::is_none")]
    evaluation: Option<EvalView>,
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
struct EvalView {
    /// Win, loss, draw for the side to move after the reply.
    value: [f64; 3],
    score: Option<i32>,
    depth: u32,
    nodes: u64,
}

impl From<&SearchResult> for EvalView {
    fn from(r: &SearchResult) -> EvalView {
        EvalView {
            value: r.value,
            score: r.score,
            depth: r.depth,
            nodes: r.nodes,
        }
    }
}

fn outcome_name(o: GameOutcome) -> &'static str {
    match o {
        GameOutcome::Ongoing => "ongoing",
        GameOutcome::BlackWin => "black",
        GameOutcome::WhiteWin => "white",
        GameOutcome::Draw => "draw",
    }
}

fn view(id: u64, game: &Game, reply: Option<&SearchResult>) -> GameView {
    GameView {
        id,
        size: game.board.height(),
        to_move: game.board.side_to_move(),
        outcome: outcome_name(game.board.outcome()),
        moves: game.board.moves().into_iter().map(Point::from).collect(),
        reply: reply.map(|r| r.best_move.into()),
        evaluation: reply.map(EvalView::from),
    }
}

fn parse_json<T: for<'de> Deserialize<'de> + Default>(body: &Bytes) -> Result<T> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Ok(T::default());
    }
    let bad = |e: serde_json::Error| ServiceError::BadRequest(format!("bad JSON: {e}"));
    let value: serde_json::Value = serde_json::from_slice(body).map_err(bad)?;
    if !value.is_object() {
        return Err(ServiceError::BadRequest("body must be a JSON object".into()));
    }
    serde_json::from_value(value).map_err(bad)
}

/// Lets the engine move when it is its turn; returns its search.
fn engine_turn(game: &mut Game, limits: &Limits) -> Result<Option<SearchResult>> {
    if game.board.outcome().is_over() || game.board.side_to_move() == game.human {
        return Ok(None);
    }
    let r = game
        .searcher
        .search(&game.board, limits, None)
        .map_err(|e| ServiceError::Engine(e.to_string()))?;
    game.board
        .place(r.best_move)
        .map_err(|e| ServiceError::Engine(format!("engine chose {}: {e}", r.best_move)))?;
    Ok(Some(r))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T> + Send + 'static) -> Result<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ServiceError::Engine(e.to_string()))?
}

async fn create_game(State(state): State<AppState>, body: Bytes) -> Result<(StatusCode, Json<GameView>)> {
    let req: NewGame = parse_json(&body)?;
    let size = req.size.unwrap_or(state.0.config.board_size);
    if !(MIN_SIZE..=MAX_SIZE).contains(&size) {
        return Err(ServiceError::BadRequest(format!(
            "size must be in {MIN_SIZE}..={MAX_SIZE}"
        )));
    }
    let mut cfg = state.0.config.clone();
    cfg.board_size = size;
    let searcher = cfg
        .build_searcher(state.0.model.clone())
        .map_err(|e| ServiceError::Engine(e.to_string()))?;
    let mut game = Game {
        board: Board::new(size, size).map_err(|e| ServiceError::BadRequest(e.to_string()))?,
        human: req.human_color.unwrap_or(Color::Black),
        searcher,
    };
    let id = {
        let mut next = state.0.next_id.lock().expect("id lock");
        let id = *next;
        *next += 1;
        id
    };
    let limits = state.move_limits();
    let (game, reply) = blocking(move || {
        let reply = engine_turn(&mut game, &limits)?;
        Ok((game, reply))
    })
    .await?;
    let body = view(id, &game, reply.as_ref());
    state
        .0
        .games
        .lock()
        .expect("games lock")
        .insert(id, Arc::new(Mutex::new(game)));
    Ok((StatusCode::CREATED, Json(body)))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MoveRequest {
    row: usize,
    col: usize,
}

impl Default for MoveRequest {
    fn default() -> Self {
        // An empty body is not a move; usize::MAX fails the bounds check.
        MoveRequest {
            row: usize::MAX,
            col: usize::MAX,
        }
    }
}

async fn play_move(State(state): State<AppState>, Path(id): Path<u64>, body: Bytes) -> Result<Json<GameView>> {
    let req: MoveRequest = parse_json(&body)?;
    let game = state.game(id)?;
    let limits = state.move_limits();
    blocking(move || {
        let mut g = game.lock().expect("game lock");
        let size = g.board.height();
        if req.row >= size || req.col >= size {
            return Err(ServiceError::BadRequest(format!(
                "move ({}, {}) is off the {size}x{size} board",
                req.row, req.col
            )));
        }
        if g.board.outcome().is_over() {
            return Err(ServiceError::Conflict("the game is over".into()));
        }
        if g.board.side_to_move() != g.human {
            return Err(ServiceError::Conflict("it is the engine's turn".into()));
        }
        let mv = Move::new(req.row, req.col);
        g.board
            .place(mv)
            .map_err(|e| ServiceError::Conflict(e.to_string()))?;
        let reply = match engine_turn(&mut g, &limits) {
            Ok(r) => r,
            Err(e) => {
                // Leave the game as it was before the request.
                g.board.undo().expect("human move was placed");
                return Err(e);
            }
        };
        Ok(Json(view(id, &g, reply.as_ref())))
    })
    .await
}

#[derive(Debug, Deserialize)]
struct AnalysisQuery {
    budget: Option<u64>,
    top: Option<usize>,
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
struct PolicyEntry {
    row: usize,
    col: usize,
    p: f64,
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
struct Analysis {
    to_move: Color,
    /// Win, loss, draw for the side to move.
    value: [f64; 3],
    score: Option<i32>,
    best_move: Point,
    pv: Vec<Point>,
    policy: Vec<PolicyEntry>,
    nodes: u64,
    depth: u32,
}

async fn analysis(
    State(state): State<AppState>,
    Path(id): Path<u64>,
    Query(q): Query<AnalysisQuery>,
) -> Result<Json<Analysis>> {
    let budget = q.budget.unwrap_or(1000);
    if budget == 0 || budget > MAX_BUDGET {
        return Err(ServiceError::BadRequest(format!("budget must be in 1..={MAX_BUDGET}")));
    }
    let top = q.top.unwrap_or(5).clamp(1, 50);
    let game = state.game(id)?;
    blocking(move || {
        let mut g = game.lock().expect("game lock");
        if g.board.outcome().is_over() {
            return Err(ServiceError::Conflict("the game is over".into()));
        }
        let board = g.board.clone();
        let limits = Limits {
            playouts: Some(budget),
            nodes: Some(budget),
            ..Limits::default()
        };
        let r = g
            .searcher
            .search(&board, &limits, None)
            .map_err(|e| ServiceError::Engine(e.to_string()))?;
        let eval = g.searcher.evaluator_mut();
        eval.reset(&board);
        let prior = eval.evaluate(&board).policy;
        let mut ranked: Vec<(usize, f64)> = prior.iter().copied().enumerate().filter(|e| e.1 > 0.0).collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let policy = ranked
            .into_iter()
            .take(top)
            .map(|(i, p)| {
                let m = board.move_at(i);
                PolicyEntry {
                    row: m.row(),
                    col: m.col(),
                    p,
                }
            })
            .collect();
        Ok(Json(Analysis {
            to_move: board.side_to_move(),
            value: r.value,
            score: r.score,
            best_move: r.best_move.into(),
            pv: r.pv.iter().map(|&m| m.into()).collect(),
            policy,
            nodes: r.nodes,
            depth: r.depth,
        }))
    })
    .await
}

async fn undo(State(state): State<AppState>, Path(id): Path<u64>) -> Result<Json<GameView>> {
    let game = state.game(id)?;
    let mut g = game.lock().expect("game lock");
    let human = g.human;
    let Some(last_human) = g.board.history().iter().rposition(|p| p.color == human) else {
        return Err(ServiceError::Conflict("no human move to undo".into()));
    };
    while g.board.ply() > last_human {
        g.board.undo().expect("history is long enough");
    }
    Ok(Json(view(id, &g, None)))
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/game", post(create_game))
        .route("/game/{id}/move", post(play_move))
        .route("/game/{id}/analysis", get(analysis))
        .route("/game/{id}/undo", post(undo))
        .with_state(state)
}

/// Serves until the process is stopped.
pub async fn serve(state: AppState, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}
