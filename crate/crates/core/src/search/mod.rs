//! Game-tree searches over an [`Evaluator`](crate::eval::Evaluator).

pub mod ab;
pub mod mcts;
pub mod tt;
pub mod vcf;

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::Serialize;
use thiserror::Error;

use crate::board::{Board, Move};
use crate::eval::Evaluator;

pub use ab::{AbParams, AlphaBeta};
pub use mcts::{Mcts, MctsParams};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SearchError {
    #[error("search budget is zero")]
    BudgetZero,
    #[error("no legal move")]
    NoLegalMove,
    #[error("game is already over")]
    GameOver,
}

/// When to stop searching. Every limit that is set applies.
#[derive(Clone, Debug, Default)]
pub struct Limits {
    /// Playouts for MCTS.
    pub playouts: Option<u64>,
    /// Iterative-deepening depth cap for alpha-beta.
    pub depth: Option<u32>,
    /// Node cap for alpha-beta.
    pub nodes: Option<u64>,
    pub time: Option<Duration>,
    pub stop: Option<Arc<AtomicBool>>,
}

impl Limits {
    pub fn playouts(n: u64) -> Limits {
        Limits {
            playouts: Some(n),
            ..Limits::default()
        }
    }

    pub fn depth(d: u32) -> Limits {
        Limits {
            depth: Some(d),
            ..Limits::default()
        }
    }

    pub fn with_time(mut self, t: Duration) -> Limits {
        self.time = Some(t);
        self
    }

    pub fn with_stop(mut self, stop: Arc<AtomicBool>) -> Limits {
        self.stop = Some(stop);
        self
    }

    pub(crate) fn stopped(&self) -> bool {
        self.stop.as_ref().is_some_and(|s| s.load(Ordering::Relaxed))
    }

    pub(crate) fn out_of_time(&self, start: Instant) -> bool {
        self.time.is_some_and(|t| start.elapsed() >= t)
    }
}

/// Per-move statistics at the root.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RootMove {
    pub mv: Move,
    pub prior: f64,
    pub visits: u64,
    /// Mean utility for the side to move at the root.
    pub q: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SearchResult {
    pub best_move: Move,
    pub pv: Vec<Move>,
    /// Win, loss and draw probability for the side to move.
    pub value: [f64; 3],
    /// Alpha-beta score in centi-values; absent for MCTS.
    pub score: Option<i32>,
    /// Alpha-beta nodes or MCTS playouts.
    pub nodes: u64,
    /// Completed alpha-beta depth or the deepest MCTS path.
    pub depth: u32,
    pub elapsed_ms: u64,
    pub root_moves: Vec<RootMove>,
}

impl SearchResult {
    pub fn utility(&self) -> f64 {
        self.value[0] - self.value[1]
    }
}

/// Progress report emitted during a search.
#[derive(Clone, Debug, PartialEq)]
pub struct SearchInfo {
    pub depth: u32,
    pub nodes: u64,
    pub best_move: Move,
    pub score: Option<i32>,
    pub utility: f64,
    pub pv: Vec<Move>,
    pub elapsed_ms: u64,
}

impl SearchInfo {
    /// One-line rendering used by the protocol and CLI.
    pub fn line(&self) -> String {
        let pv: Vec<String> = self.pv.iter().map(Move::to_string).collect();
        let score = match self.score {
            Some(s) => format!("score {s}"),
            None => format!("value {:.3}", self.utility),
        };
        let nps = self.nodes * 1000 / self.elapsed_ms.max(1);
        format!(
            "depth {} nodes {} nps {} {} best {} pv {}",
            self.depth,
            self.nodes,
            nps,
            score,
            self.best_move,
            pv.join(" ")
        )
    }
}

pub type InfoSink<'a> = &'a mut dyn FnMut(&SearchInfo);

/// Checks the preconditions shared by both searches.
pub(crate) fn check_root(board: &Board) -> Result<(), SearchError> {
    if board.outcome().is_over() {
        return Err(SearchError::GameOver);
    }
    if board.is_full() {
        return Err(SearchError::NoLegalMove);
    }
    Ok(())
}

/// A search backend bound to its evaluator.
pub trait Searcher: Send {
    fn search(
        &mut self,
        board: &Board,
        limits: &Limits,
        info: Option<InfoSink<'_>>,
    ) -> Result<SearchResult, SearchError>;

    /// Forgets state carried between searches (hash tables).
    fn clear(&mut self) {}

    fn evaluator_mut(&mut self) -> &mut dyn Evaluator;

    fn name(&self) -> String;
}
