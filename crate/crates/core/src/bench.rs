//! Fixed benchmark suite.
//!
//! Twenty positions grown from the opening book with a seeded generator.
//! Node, playout and lookup counts depend only on the model and the
//! settings; the rates depend on the machine.

use std::sync::Arc;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::board::Board;
use crate::book::balanced_openings;
use crate::eval::{Evaluator, MixnetEvaluator, Model};
use crate::search::{AbParams, AlphaBeta, Limits, Mcts, MctsParams, SearchError, Searcher};

pub const SUITE_SIZE: usize = 20;
const SUITE_SEED: u64 = 0x6265_6e63_6873_7569;

/// The benchmark positions on a `size` x `size` board (at least 9).
pub fn bench_positions(size: usize) -> Vec<Board> {
    let mut rng = ChaCha8Rng::seed_from_u64(SUITE_SEED);
    balanced_openings()
        .iter()
        .take(SUITE_SIZE)
        .enumerate()
        .map(|(i, o)| {
            let mut board = o.board(size).expect("book fits the bench board");
            let extra = 4 + 2 * i;
            while board.ply() < 3 + extra {
                let mut moves = board.candidate_moves(2);
                moves.shuffle(&mut rng);
                let mv = moves
                    .into_iter()
                    .find(|&m| {
                        let mut b = board.clone();
                        b.place(m).is_ok() && !b.outcome().is_over()
                    })
                    .expect("quiet move exists");
                board.place(mv).expect("checked above");
            }
            board
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct BenchSettings {
    pub board_size: usize,
    pub ab_depth: u32,
    pub mcts_playouts: u64,
}

impl Default for BenchSettings {
    fn default() -> Self {
        BenchSettings {
            board_size: 15,
            ab_depth: 3,
            mcts_playouts: 400,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchReport {
    pub model: String,
    pub positions: usize,
    pub full_evals: u64,
    pub full_evals_per_sec: f64,
    /// Codebook lookups for one rebuild, averaged.
    pub lookups_per_full: f64,
    pub incremental_evals: u64,
    pub incremental_evals_per_sec: f64,
    /// Codebook lookups for one move and its evaluation, averaged.
    pub lookups_per_move: f64,
    pub ab_nodes: u64,
    pub ab_nodes_per_sec: f64,
    pub mcts_playouts: u64,
    pub mcts_playouts_per_sec: f64,
    pub elapsed_ms: u64,
}

fn rate(count: u64, since: Instant) -> f64 {
    count as f64 / since.elapsed().as_secs_f64().max(1e-9)
}

/// Runs the suite with `model`.
pub fn run_bench(model: Arc<Model>, settings: &BenchSettings) -> Result<BenchReport, SearchError> {
    let start = Instant::now();
    let positions = bench_positions(settings.board_size);
    let mut eval = MixnetEvaluator::new(model.clone(), &positions[0]);

    // Full path: rebuild from the board, then evaluate.
    let mut acc = model.accumulator(&positions[0]).expect("model is consistent");
    acc.reset_counters();
    let t = Instant::now();
    let mut full_evals = 0u64;
    for _ in 0..3 {
        for b in &positions {
            acc.refresh(b);
            std::hint::black_box(model.heads().evaluate(acc.feature_view(b.side_to_move()), &crate::eval::legal_mask(b)));
            full_evals += 1;
        }
    }
    let full_rate = rate(full_evals, t);
    let lookups_per_full = acc.counters().lookups as f64 / full_evals as f64;

    // Incremental path: every radius-1 move of every position.
    let mut incremental = 0u64;
    let mut inc_lookups = 0u64;
    let t = Instant::now();
    for b in &positions {
        let mut board = b.clone();
        eval.reset(&board);
        let before = eval.lookups();
        for mv in b.candidate_moves(1) {
            board.place(mv).expect("candidate is empty");
            eval.push(&board, mv);
            std::hint::black_box(eval.evaluate(&board));
            eval.pop();
            board.undo().expect("just placed");
            incremental += 1;
        }
        inc_lookups += eval.lookups() - before;
    }
    let inc_rate = rate(incremental, t);

    let mut ab = AlphaBeta::new(AbParams::default(), eval);
    let mut ab_nodes = 0;
    let t = Instant::now();
    for b in &positions {
        ab.clear();
        ab_nodes += ab.search(b, &Limits::depth(settings.ab_depth), None)?.nodes;
    }
    let ab_rate = rate(ab_nodes, t);

    let mut mcts = Mcts::new(MctsParams::default(), MixnetEvaluator::new(model.clone(), &positions[0]));
    let mut playouts = 0;
    let t = Instant::now();
    for b in &positions {
        playouts += mcts.search(b, &Limits::playouts(settings.mcts_playouts), None)?.nodes;
    }
    let mcts_rate = rate(playouts, t);

    Ok(BenchReport {
        model: ab.name(),
        positions: positions.len(),
        full_evals,
        full_evals_per_sec: full_rate,
        lookups_per_full,
        incremental_evals: incremental,
        incremental_evals_per_sec: inc_rate,
        lookups_per_move: inc_lookups as f64 / incremental as f64,
        ab_nodes,
        ab_nodes_per_sec: ab_rate,
        mcts_playouts: playouts,
        mcts_playouts_per_sec: mcts_rate,
        elapsed_ms: start.elapsed().as_millis() as u64,
    })
}

impl BenchReport {
    /// Human-readable summary, one figure per line.
    pub fn summary(&self) -> String {
        format!(
            "model {}\npositions {}\nfull rebuild: {} evals, {:.0}/s, {:.1} lookups each\n\
             incremental: {} evals, {:.0}/s, {:.1} lookups each\n\
             alpha-beta: {} nodes, {:.0} nodes/s\nmcts: {} playouts, {:.0} playouts/s\ntotal {} ms",
            self.model,
            self.positions,
            self.full_evals,
            self.full_evals_per_sec,
            self.lookups_per_full,
            self.incremental_evals,
            self.incremental_evals_per_sec,
            self.lookups_per_move,
            self.ab_nodes,
            self.ab_nodes_per_sec,
            self.mcts_playouts,
            self.mcts_playouts_per_sec,
            self.elapsed_ms
        )
    }
}
