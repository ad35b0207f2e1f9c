//! Principal variation search with continuous-four quiescence.
//!
//! Scores are centi-values for the side to move: the value head's utility
//! times 1000 for quiet leaves, `MATE - ply` for a five completed at `ply`
//! plies from the root and the negation for a loss.
//!
//! Transposition-table cutoffs only use entries searched to exactly the
//! remaining depth, which keeps the root score identical to a plain
//! fixed-depth negamax when the pruning heuristics are off.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::tt::{is_mate_score, score_from_tt, score_to_tt, Bound, TranspositionTable, MATE};
use super::vcf::vcf;
use super::{check_root, InfoSink, Limits, RootMove, SearchError, SearchInfo, SearchResult, Searcher};
use crate::board::{Board, Color, Move};
use crate::eval::Evaluator;
use crate::threats::{five_cells, five_cells_after, four_moves};

const INF: i32 = MATE + 1;
/// Nodes between stop-flag and clock checks.
const CHECK_INTERVAL: u64 = 1024;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AbParams {
    pub max_depth: u32,
    /// Candidate moves lie within this Chebyshev distance of a stone.
    pub candidate_radius: usize,
    pub tt_mb: usize,
    pub use_tt: bool,
    pub aspiration: bool,
    pub aspiration_window: i32,
    pub futility: bool,
    /// Margin by remaining depth 1, 2 and 3.
    pub futility_margins: [i32; 3],
    pub lmr: bool,
    pub lmr_base: f64,
    pub lmr_divisor: f64,
    pub null_move: bool,
    pub null_reduction: u32,
    pub singular: bool,
    pub singular_margin: i32,
    pub singular_min_depth: u32,
    pub vcf: bool,
    /// Node cap of the continuous-four search run at every leaf.
    pub vcf_node_cap: u64,
    pub vcf_max_plies: u32,
    /// Order by the policy head; otherwise by board index.
    pub policy_ordering: bool,
}

impl Default for AbParams {
    fn default() -> Self {
        AbParams {
            max_depth: 8,
            candidate_radius: 2,
            tt_mb: 64,
            use_tt: true,
            aspiration: true,
            aspiration_window: 60,
            futility: true,
            futility_margins: [120, 250, 400],
            lmr: true,
            lmr_base: 0.75,
            lmr_divisor: 2.25,
            null_move: true,
            null_reduction: 2,
            singular: true,
            singular_margin: 80,
            singular_min_depth: 4,
            vcf: true,
            vcf_node_cap: 2_000,
            vcf_max_plies: 15,
            policy_ordering: true,
        }
    }
}

impl AbParams {
    /// Defaults with every pruning and reduction heuristic and the hash
    /// table off: a plain fixed-window search.
    pub fn plain() -> AbParams {
        AbParams {
            use_tt: false,
            aspiration: false,
            futility: false,
            lmr: false,
            null_move: false,
            singular: false,
            ..AbParams::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.max_depth == 0 {
            return Err("max_depth must be positive".into());
        }
        if self.futility_margins.iter().any(|&m| m < 0) || self.aspiration_window <= 0 || self.singular_margin < 0 {
            return Err("margins must be non-negative".into());
        }
        if self.lmr_divisor <= 0.0 || self.lmr_base < 0.0 {
            return Err("LMR parameters must be positive".into());
        }
        Ok(())
    }

    /// Late-move reduction for the `index`-th searched move (from 1).
    pub fn reduction(&self, depth: i32, index: usize) -> i32 {
        if depth < 1 || index < 1 {
            return 0;
        }
        (self.lmr_base + (depth as f64).ln() * (index as f64).ln() / self.lmr_divisor) as i32
    }
}

/// Moves to search in a position.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Generated {
    /// The side to move completes five with this move.
    Win(Move),
    /// Moves to try. `forced` when the opponent threatens five and only
    /// the blocking cells remain.
    Moves { moves: Vec<Move>, forced: bool },
}

pub fn generate(board: &Board, radius: usize) -> Generated {
    let me = board.side_to_move();
    if let Some(&m) = five_cells(board, me).first() {
        return Generated::Win(m);
    }
    let threats = five_cells(board, me.opponent());
    if !threats.is_empty() {
        return Generated::Moves {
            moves: threats,
            forced: true,
        };
    }
    let mut moves = board.candidate_moves(radius);
    if moves.is_empty() {
        moves = board.legal_moves();
    }
    Generated::Moves { moves, forced: false }
}

/// `tt_move` first, then descending policy with board order breaking ties.
pub fn order_moves(board: &Board, moves: &[Move], policy: &[f64], tt_move: Option<Move>) -> Vec<Move> {
    let mut keyed: Vec<(Move, f64, usize)> = moves
        .iter()
        .map(|&m| {
            let i = board.index(m);
            (m, policy.get(i).copied().unwrap_or(0.0), i)
        })
        .collect();
    keyed.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.2.cmp(&b.2)));
    let mut out: Vec<Move> = keyed.into_iter().map(|k| k.0).collect();
    if let Some(t) = tt_move {
        if let Some(p) = out.iter().position(|&m| m == t) {
            let m = out.remove(p);
            out.insert(0, m);
        }
    }
    out
}

/// Static score of the side to move: utility times 1000.
pub fn static_score(eval: &mut dyn Evaluator, board: &Board) -> i32 {
    (eval.evaluate(board).utility() * 1000.0).round() as i32
}

/// Score of a depth-0 node at `ply`: a proven continuous-four win, a
/// proven loss to two five threats, or the static score.
pub fn leaf_score(board: &mut Board, eval: &mut dyn Evaluator, params: &AbParams, ply: usize) -> (i32, u64, Vec<Move>) {
    let mut nodes = 0;
    if params.vcf {
        let r = vcf(board, params.vcf_max_plies, params.vcf_node_cap);
        nodes = r.nodes;
        if let Some(k) = r.plies {
            return (MATE - (ply as i32 + k as i32), nodes, r.line);
        }
    }
    let me = board.side_to_move();
    if five_cells(board, me.opponent()).len() >= 2 {
        return (-(MATE - (ply as i32 + 2)), nodes, Vec::new());
    }
    (static_score(eval, board), nodes, Vec::new())
}

/// Score of a finished game for the side to move at `ply`.
pub fn terminal_score(board: &Board, ply: usize) -> Option<i32> {
    let outcome = board.outcome();
    if !outcome.is_over() {
        return None;
    }
    Some(match outcome.winner() {
        Some(_) => -(MATE - ply as i32),
        None => 0,
    })
}

fn has_four_move(board: &Board, color: Color) -> bool {
    !four_moves(board, color).is_empty()
}

/// Work counters of one search.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct AbStats {
    pub nodes: u64,
    pub vcf_nodes: u64,
    pub tt_hits: u64,
    pub null_cutoffs: u64,
    pub futility_skips: u64,
    pub reductions: u64,
    pub extensions: u64,
}

struct Ctx<'a> {
    board: Board,
    eval: &'a mut dyn Evaluator,
    tt: &'a mut TranspositionTable,
    params: &'a AbParams,
    limits: &'a Limits,
    start: Instant,
    stats: AbStats,
    aborted: bool,
    pv: Vec<Vec<Move>>,
}

impl Ctx<'_> {
    fn check_abort(&mut self) -> bool {
        if !self.aborted && self.stats.nodes % CHECK_INTERVAL == 0 {
            self.aborted = self.limits.stopped()
                || self.limits.out_of_time(self.start)
                || self.limits.nodes.is_some_and(|n| self.stats.nodes >= n);
        }
        self.aborted
    }

    fn set_pv(&mut self, ply: usize, mv: Move) {
        if self.pv.len() <= ply + 1 {
            self.pv.resize(ply + 2, Vec::new());
        }
        let tail = std::mem::take(&mut self.pv[ply + 1]);
        let line = &mut self.pv[ply];
        line.clear();
        line.push(mv);
        line.extend_from_slice(&tail);
        self.pv[ply + 1] = tail;
    }

    fn clear_pv(&mut self, ply: usize) {
        if self.pv.len() <= ply {
            self.pv.resize(ply + 1, Vec::new());
        }
        self.pv[ply].clear();
    }

    fn play(&mut self, mv: Move) {
        self.board.place(mv).expect("search moves are legal");
        self.eval.push(&self.board, mv);
    }

    fn unplay(&mut self) {
        self.board.undo().expect("undo matches play");
        self.eval.pop();
    }

    fn pvs(&mut self, depth: i32, mut alpha: i32, beta: i32, ply: usize, excluded: Option<Move>, null_ok: bool) -> i32 {
        self.stats.nodes += 1;
        self.clear_pv(ply);
        if self.check_abort() {
            return 0;
        }
        if let Some(s) = terminal_score(&self.board, ply) {
            return s;
        }
        let (moves, forced) = match generate(&self.board, self.params.candidate_radius) {
            Generated::Win(m) => {
                self.set_pv(ply, m);
                return MATE - (ply as i32 + 1);
            }
            Generated::Moves { moves, forced } => (moves, forced),
        };
        if depth <= 0 {
            let (s, n, line) = leaf_score(&mut self.board, self.eval, self.params, ply);
            self.stats.vcf_nodes += n;
            if !line.is_empty() {
                self.pv[ply] = line;
            }
            return s;
        }

        let alpha_orig = alpha;
        let is_pv = beta - alpha > 1;
        let me = self.board.side_to_move();
        let key = self.board.hash();
        let entry = if self.params.use_tt { self.tt.probe(key) } else { None };
        let tt_move = entry.and_then(|e| e.best_move).filter(|m| moves.contains(m));
        if let Some(e) = entry {
            if excluded.is_none() && ply > 0 && e.depth == depth {
                let s = score_from_tt(e.score, ply);
                let cut = match e.bound {
                    Bound::Exact => true,
                    Bound::Lower => s >= beta,
                    Bound::Upper => s <= alpha,
                };
                if cut {
                    self.stats.tt_hits += 1;
                    if let Some(m) = e.best_move {
                        self.set_pv(ply, m);
                    }
                    return s;
                }
            }
        }

        let evaluation = self.eval.evaluate(&self.board);
        let static_eval = (evaluation.utility() * 1000.0).round() as i32;

        let mut threats_checked: Option<bool> = None;
        let mut board_has_fours = |b: &Board| -> bool {
            *threats_checked.get_or_insert_with(|| has_four_move(b, me) || has_four_move(b, me.opponent()))
        };

        if self.params.null_move
            && null_ok
            && !is_pv
            && excluded.is_none()
            && !forced
            && depth >= 2
            && static_eval >= beta
            && !is_mate_score(beta)
            && !board_has_fours(&self.board)
        {
            let r = self.params.null_reduction as i32;
            self.board.pass_turn();
            let s = -self.pvs(depth - 1 - r, -beta, -beta + 1, ply + 1, None, false);
            self.board.pass_turn();
            if self.aborted {
                return 0;
            }
            if s >= beta {
                self.stats.null_cutoffs += 1;
                return beta;
            }
        }

        let ordered = if self.params.policy_ordering {
            order_moves(&self.board, &moves, &evaluation.policy, tt_move)
        } else {
            order_moves(&self.board, &moves, &[], tt_move)
        };

        let mut singular_move = None;
        if let (Some(e), Some(t)) = (entry, tt_move) {
            if self.params.singular
                && excluded.is_none()
                && depth >= self.params.singular_min_depth as i32
                && e.depth >= depth - 3
                && e.bound != Bound::Upper
                && !is_mate_score(e.score)
                && ordered.len() > 1
            {
                let s_beta = score_from_tt(e.score, ply) - self.params.singular_margin;
                let s = self.pvs((depth - 1) / 2, s_beta - 1, s_beta, ply, Some(t), false);
                if self.aborted {
                    return 0;
                }
                if s < s_beta {
                    singular_move = Some(t);
                    self.stats.extensions += 1;
                }
            }
        }

        let futile = self.params.futility
            && !is_pv
            && !forced
            && depth <= 3
            && !is_mate_score(alpha)
            && static_eval + self.params.futility_margins[(depth - 1) as usize] <= alpha
            && !board_has_fours(&self.board);

        let mut best = -INF;
        let mut best_move = None;
        let mut searched = 0usize;
        for mv in ordered {
            if Some(mv) == excluded {
                continue;
            }
            let quiet = !forced && five_cells_after(&self.board, mv, me, &[]).is_empty();
            if futile && searched > 0 && quiet {
                self.stats.futility_skips += 1;
                continue;
            }
            let ext = i32::from(Some(mv) == singular_move);
            let nd = depth - 1 + ext;
            self.play(mv);
            let score = if searched == 0 {
                -self.pvs(nd, -beta, -alpha, ply + 1, None, true)
            } else {
                let mut r = 0;
                if self.params.lmr && depth >= 3 && searched >= 3 && quiet {
                    r = self.params.reduction(depth, searched).clamp(0, (nd - 1).max(0));
                    if r > 0 {
                        self.stats.reductions += 1;
                    }
                }
                let mut s = -self.pvs(nd - r, -alpha - 1, -alpha, ply + 1, None, true);
                if s > alpha && r > 0 {
                    s = -self.pvs(nd, -alpha - 1, -alpha, ply + 1, None, true);
                }
                if s > alpha && s < beta {
                    s = -self.pvs(nd, -beta, -alpha, ply + 1, None, true);
                }
                s
            };
            self.unplay();
            if self.aborted {
                return 0;
            }
            searched += 1;
            if score > best {
                best = score;
                best_move = Some(mv);
                if score > alpha {
                    alpha = score;
                    self.set_pv(ply, mv);
                    if alpha >= beta {
                        break;
                    }
                }
            }
        }
        if searched == 0 {
            return if excluded.is_some() { alpha } else { static_eval };
        }
        if self.params.use_tt && excluded.is_none() {
            let bound = if best <= alpha_orig {
                Bound::Upper
            } else if best >= beta {
                Bound::Lower
            } else {
                Bound::Exact
            };
            self.tt.store(key, depth, bound, score_to_tt(best, ply), best_move);
        }
        best
    }
}

/// Iterative deepening from `board`. Uses `limits.depth` when set,
/// otherwise `params.max_depth`.
pub fn search_root(
    board: &Board,
    eval: &mut dyn Evaluator,
    tt: &mut TranspositionTable,
    params: &AbParams,
    limits: &Limits,
    mut info: Option<InfoSink<'_>>,
) -> Result<(SearchResult, AbStats), SearchError> {
    check_root(board)?;
    let start = Instant::now();
    eval.reset(board);
    tt.new_search();
    let root_eval = eval.evaluate(board);
    let max_depth = limits.depth.unwrap_or(params.max_depth).max(1) as i32;

    let mut ctx = Ctx {
        board: board.clone(),
        eval,
        tt,
        params,
        limits,
        start,
        stats: AbStats::default(),
        aborted: false,
        pv: vec![Vec::new(); 64],
    };

    let root_moves = match generate(board, params.candidate_radius) {
        Generated::Win(m) => vec![m],
        Generated::Moves { moves, .. } => order_moves(board, &moves, &root_eval.policy, None),
    };
    let Some(&first) = root_moves.first() else {
        return Err(SearchError::NoLegalMove);
    };

    let mut best: (i32, Vec<Move>) = (static_score(ctx.eval, board), vec![first]);
    let mut completed = 0u32;
    for depth in 1..=max_depth {
        let mut window = params.aspiration_window;
        let (mut alpha, mut beta) = if params.aspiration && depth > 1 && !is_mate_score(best.0) {
            (best.0 - window, best.0 + window)
        } else {
            (-INF, INF)
        };
        let score = loop {
            let s = ctx.pvs(depth, alpha, beta, 0, None, false);
            if ctx.aborted {
                break None;
            }
            if s <= alpha && alpha > -INF {
                window *= 4;
                alpha = if window > 2000 { -INF } else { s - window };
            } else if s >= beta && beta < INF {
                window *= 4;
                beta = if window > 2000 { INF } else { s + window };
            } else {
                break Some(s);
            }
        };
        let Some(score) = score else { break };
        let pv = ctx.pv[0].clone();
        if !pv.is_empty() {
            best = (score, pv);
        } else {
            best.0 = score;
        }
        completed = depth as u32;
        if let Some(sink) = info.as_mut() {
            sink(&SearchInfo {
                depth: completed,
                nodes: ctx.stats.nodes,
                best_move: best.1[0],
                score: Some(best.0),
                utility: score_utility(best.0),
                pv: best.1.clone(),
                elapsed_ms: start.elapsed().as_millis() as u64,
            });
        }
        if is_mate_score(score) && MATE - score.abs() <= depth {
            break;
        }
        if limits.out_of_time(start) || limits.stopped() {
            break;
        }
    }

    let u = score_utility(best.0);
    let d = if is_mate_score(best.0) { 0.0 } else { root_eval.value[2].clamp(0.0, 1.0) };
    let u = u.clamp(-(1.0 - d), 1.0 - d);
    let value = [(1.0 - d + u) / 2.0, (1.0 - d - u) / 2.0, d];
    let root_list = root_moves
        .iter()
        .map(|&m| RootMove {
            mv: m,
            prior: root_eval.policy.get(board.index(m)).copied().unwrap_or(0.0),
            visits: 0,
            q: 0.0,
        })
        .collect();
    let stats = ctx.stats;
    Ok((
        SearchResult {
            best_move: best.1[0],
            pv: best.1,
            value,
            score: Some(best.0),
            nodes: stats.nodes,
            depth: completed,
            elapsed_ms: start.elapsed().as_millis() as u64,
            root_moves: root_list,
        },
        stats,
    ))
}

/// Utility in `[-1, 1]` implied by a score.
pub fn score_utility(score: i32) -> f64 {
    if is_mate_score(score) {
        score.signum() as f64
    } else {
        (score as f64 / 1000.0).clamp(-1.0, 1.0)
    }
}

/// Alpha-beta backend owning its evaluator and hash table.
pub struct AlphaBeta<E> {
    pub params: AbParams,
    pub eval: E,
    pub tt: TranspositionTable,
    pub last_stats: AbStats,
}

impl<E: Evaluator> AlphaBeta<E> {
    pub fn new(params: AbParams, eval: E) -> AlphaBeta<E> {
        let tt = TranspositionTable::new(if params.use_tt { params.tt_mb } else { 0 });
        AlphaBeta {
            params,
            eval,
            tt,
            last_stats: AbStats::default(),
        }
    }
}

impl<E: Evaluator> Searcher for AlphaBeta<E> {
    fn search(
        &mut self,
        board: &Board,
        limits: &Limits,
        info: Option<InfoSink<'_>>,
    ) -> Result<SearchResult, SearchError> {
        let (r, stats) = search_root(board, &mut self.eval, &mut self.tt, &self.params, limits, info)?;
        self.last_stats = stats;
        Ok(r)
    }

    fn clear(&mut self) {
        self.tt.clear();
    }

    fn evaluator_mut(&mut self) -> &mut dyn Evaluator {
        &mut self.eval
    }

    fn name(&self) -> String {
        format!("alphabeta/{}", self.eval.name())
    }
}
