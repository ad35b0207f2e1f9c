//! PUCT Monte Carlo tree search.
//!
//! Each node stores its statistics from the point of view of the player
//! who moved into it, so a parent reads its children's `W / N` directly as
//! its own action values. Children are evaluated lazily: the first visit
//! to a node runs the evaluator and keeps a compact prior list, the second
//! visit materializes child nodes.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{check_root, InfoSink, Limits, RootMove, SearchError, SearchInfo, SearchResult, Searcher};
use crate::board::{Board, Move};
use crate::eval::Evaluator;
use crate::threats::makes_five;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MctsParams {
    pub c_puct_init: f64,
    pub c_puct_log: f64,
    pub c_puct_base: f64,
    pub c_fpu: f64,
    /// One-sided z-score of the root lower confidence bound.
    pub lcb_z: f64,
    /// Playouts between progress reports.
    pub info_interval: u64,
}

impl Default for MctsParams {
    fn default() -> Self {
        MctsParams {
            c_puct_init: 1.0,
            c_puct_log: 0.4,
            c_puct_base: 500.0,
            c_fpu: 0.1,
            lcb_z: 1.28,
            info_interval: 4096,
        }
    }
}

/// Dynamic exploration factor.
pub fn cpuct(parent_visits: u64, p: &MctsParams) -> f64 {
    p.c_puct_init + p.c_puct_log * (1.0 + parent_visits as f64 / p.c_puct_base).ln()
}

/// Selection inputs of one child, values from the selecting player's view.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChildStats {
    pub prior: f64,
    pub visits: u64,
    /// Sum of utilities over the child's visits.
    pub w: f64,
}

/// PUCT score of every child. `parent_visits` counts the parent's own
/// evaluation plus all child visits; `parent_q` is the parent's mean
/// utility for the selecting player.
pub fn puct_scores(children: &[ChildStats], parent_visits: u64, parent_q: f64, p: &MctsParams) -> Vec<f64> {
    let c = cpuct(parent_visits, p);
    let sqrt_n = (parent_visits as f64).sqrt();
    let explored: f64 = children.iter().filter(|s| s.visits > 0).map(|s| s.prior).sum();
    let fpu = parent_q - p.c_fpu * explored.sqrt();
    children
        .iter()
        .map(|s| {
            let q = if s.visits > 0 { s.w / s.visits as f64 } else { fpu };
            q + c * s.prior * sqrt_n / (1.0 + s.visits as f64)
        })
        .collect()
}

/// Index of the highest PUCT score, lowest index on ties.
pub fn select_child(children: &[ChildStats], parent_visits: u64, parent_q: f64, p: &MctsParams) -> usize {
    let scores = puct_scores(children, parent_visits, parent_q, p);
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Lower confidence bound of a child's mean from its visit count,
/// utility sum and squared-utility sum. Sample variance; needs `n >= 2`.
pub fn lower_confidence_bound(n: u64, w: f64, w2: f64, z: f64) -> f64 {
    let nf = n as f64;
    let q = w / nf;
    let var = ((w2 - nf * q * q) / (nf - 1.0)).max(0.0);
    q - z * var.sqrt() / nf.sqrt()
}

/// Root choice: highest LCB among children with at least two visits;
/// when none qualify, most visits, then highest prior, then lowest index.
/// Entries are `(prior, visits, w, w2)`.
pub fn choose_root(children: &[(f64, u64, f64, f64)], z: f64) -> usize {
    let mut best: Option<(usize, f64)> = None;
    for (i, &(_, n, w, w2)) in children.iter().enumerate() {
        if n < 2 {
            continue;
        }
        let l = lower_confidence_bound(n, w, w2, z);
        if best.map_or(true, |(_, b)| l > b) {
            best = Some((i, l));
        }
    }
    if let Some((i, _)) = best {
        return i;
    }
    let mut i_best = 0;
    for (i, c) in children.iter().enumerate() {
        let b = children[i_best];
        if c.1 > b.1 || (c.1 == b.1 && c.0 > b.0) {
            i_best = i;
        }
    }
    i_best
}

#[derive(Clone, Debug)]
struct Node {
    mv: Move,
    prior: f32,
    n: u64,
    w: f64,
    w2: f64,
    draw: f64,
    /// Priors kept after the first evaluation, in move-index order.
    priors: Vec<(u16, f32)>,
    /// `(first, count)` in the arena once materialized.
    children: Option<(u32, u32)>,
    /// Exact value for the side to move here when the game is over.
    terminal: Option<f64>,
    /// Child that completes five, found at materialization.
    win_child: Option<u32>,
}

impl Node {
    fn new(mv: Move, prior: f32) -> Node {
        Node {
            mv,
            prior,
            n: 0,
            w: 0.0,
            w2: 0.0,
            draw: 0.0,
            priors: Vec::new(),
            children: None,
            terminal: None,
            win_child: None,
        }
    }
}

/// Search tree of one [`run_search`] call.
#[derive(Debug)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn children(&self, i: usize) -> std::ops::Range<usize> {
        match self.nodes[i].children {
            Some((f, c)) => f as usize..(f + c) as usize,
            None => 0..0,
        }
    }

    /// Checks visit conservation and utility bounds at every node.
    pub fn check_invariants(&self) -> Result<(), String> {
        for (i, node) in self.nodes.iter().enumerate() {
            if node.n > 0 {
                let q = node.w / node.n as f64;
                if !(-1.0 - 1e-9..=1.0 + 1e-9).contains(&q) {
                    return Err(format!("node {i}: Q = {q} out of range"));
                }
            }
            if node.terminal.is_none() && node.n > 0 {
                let sum: u64 = self.children(i).map(|c| self.nodes[c].n).sum();
                if node.n != sum + 1 {
                    return Err(format!("node {i}: N = {} but children hold {sum}", node.n));
                }
            }
            let prior_sum: f64 = self.children(i).map(|c| self.nodes[c].prior as f64).sum();
            if prior_sum > 1.0 + 1e-4 {
                return Err(format!("node {i}: priors sum to {prior_sum}"));
            }
        }
        Ok(())
    }
}

fn stats(node: &Node) -> ChildStats {
    ChildStats {
        prior: node.prior as f64,
        visits: node.n,
        w: node.w,
    }
}

struct Run<'a> {
    params: &'a MctsParams,
    tree: Tree,
    board: Board,
    eval: &'a mut dyn Evaluator,
    max_depth: usize,
}

impl Run<'_> {
    fn materialize(&mut self, i: usize) {
        let first = self.tree.nodes.len() as u32;
        let priors = std::mem::take(&mut self.tree.nodes[i].priors);
        let me = self.board.side_to_move();
        let mut win_child = None;
        for (k, &(cell, p)) in priors.iter().enumerate() {
            let mv = self.board.move_at(cell as usize);
            let mut child = Node::new(mv, p);
            if makes_five(&self.board, mv, me) {
                child.terminal = Some(-1.0);
                win_child.get_or_insert(first + k as u32);
            }
            self.tree.nodes.push(child);
        }
        let node = &mut self.tree.nodes[i];
        node.children = Some((first, priors.len() as u32));
        node.win_child = win_child;
    }

    fn pick(&self, i: usize) -> usize {
        let node = &self.tree.nodes[i];
        if let Some(w) = node.win_child {
            return w as usize;
        }
        let range = self.tree.children(i);
        let kids: Vec<ChildStats> = self.tree.nodes[range.clone()].iter().map(stats).collect();
        let parent_q = if node.n > 0 { -node.w / node.n as f64 } else { 0.0 };
        range.start + select_child(&kids, node.n, parent_q, self.params)
    }

    fn playout(&mut self) {
        let mut path = vec![0usize];
        let mut i = 0usize;
        let (value, draw) = loop {
            let node = &self.tree.nodes[i];
            if let Some(t) = node.terminal {
                break (t, if t == 0.0 { 1.0 } else { 0.0 });
            }
            if node.n == 0 {
                let e = self.eval.evaluate(&self.board);
                let mut priors: Vec<(u16, f32)> = e
                    .policy
                    .iter()
                    .enumerate()
                    .filter(|(_, &p)| p > 0.0)
                    .map(|(idx, &p)| (idx as u16, p as f32))
                    .collect();
                if priors.is_empty() {
                    let legal = self.board.legal_moves();
                    let p = 1.0 / legal.len() as f32;
                    priors = legal.iter().map(|&m| (self.board.index(m) as u16, p)).collect();
                }
                self.tree.nodes[i].priors = priors;
                break (e.utility(), e.value[2]);
            }
            if node.children.is_none() {
                self.materialize(i);
            }
            let c = self.pick(i);
            let mv = self.tree.nodes[c].mv;
            self.board.place(mv).expect("tree moves are legal");
            self.eval.push(&self.board, mv);
            let outcome = self.board.outcome();
            if outcome.is_over() && self.tree.nodes[c].terminal.is_none() {
                self.tree.nodes[c].terminal = Some(if outcome.winner().is_some() { -1.0 } else { 0.0 });
            }
            path.push(c);
            i = c;
        };
        self.max_depth = self.max_depth.max(path.len() - 1);
        // `value` is for the side to move at the leaf; each node stores the
        // view of the player who moved into it.
        let mut v = value;
        for &k in path.iter().rev() {
            let node = &mut self.tree.nodes[k];
            node.n += 1;
            node.w -= v;
            node.w2 += v * v;
            node.draw += draw;
            v = -v;
        }
        for _ in 1..path.len() {
            self.board.undo().expect("undo matches place");
            self.eval.pop();
        }
    }

    fn root_entries(&self) -> Vec<(Move, f64, u64, f64, f64)> {
        let root = &self.tree.nodes[0];
        match root.children {
            Some(_) => self.tree.nodes[self.tree.children(0)]
                .iter()
                .map(|c| (c.mv, c.prior as f64, c.n, c.w, c.w2))
                .collect(),
            None => root
                .priors
                .iter()
                .map(|&(cell, p)| (self.board.move_at(cell as usize), p as f64, 0, 0.0, 0.0))
                .collect(),
        }
    }

    fn best_root(&self) -> usize {
        let entries: Vec<(f64, u64, f64, f64)> = self
            .root_entries()
            .iter()
            .map(|&(_, p, n, w, w2)| (p, n, w, w2))
            .collect();
        choose_root(&entries, self.params.lcb_z)
    }

    fn principal_variation(&self, first: usize) -> Vec<Move> {
        let mut pv = Vec::new();
        let entries = self.root_entries();
        let Some(e) = entries.get(first) else {
            return pv;
        };
        pv.push(e.0);
        if self.tree.nodes[0].children.is_none() {
            return pv;
        }
        let mut i = self.tree.children(0).start + first;
        loop {
            let range = self.tree.children(i);
            if range.is_empty() {
                break;
            }
            let mut best = range.start;
            for c in range {
                if self.tree.nodes[c].n > self.tree.nodes[best].n {
                    best = c;
                }
            }
            if self.tree.nodes[best].n == 0 {
                break;
            }
            pv.push(self.tree.nodes[best].mv);
            i = best;
        }
        pv
    }

    fn info(&self, playouts: u64, start: Instant) -> SearchInfo {
        let best = self.best_root();
        let pv = self.principal_variation(best);
        let root = &self.tree.nodes[0];
        SearchInfo {
            depth: self.max_depth as u32,
            nodes: playouts,
            best_move: pv[0],
            score: None,
            utility: if root.n > 0 { -root.w / root.n as f64 } else { 0.0 },
            pv,
            elapsed_ms: start.elapsed().as_millis() as u64,
        }
    }
}

/// Runs playouts from `board` until a limit is hit. Requires a playout or
/// time budget.
pub fn run_search(
    board: &Board,
    eval: &mut dyn Evaluator,
    params: &MctsParams,
    limits: &Limits,
    mut info: Option<InfoSink<'_>>,
) -> Result<(SearchResult, Tree), SearchError> {
    check_root(board)?;
    if limits.playouts == Some(0) || (limits.playouts.is_none() && limits.time.is_none()) {
        return Err(SearchError::BudgetZero);
    }
    let start = Instant::now();
    eval.reset(board);
    let mut run = Run {
        params,
        tree: Tree {
            nodes: vec![Node::new(Move::new(0, 0), 1.0)],
        },
        board: board.clone(),
        eval,
        max_depth: 0,
    };
    let mut playouts = 0u64;
    loop {
        if limits.playouts.is_some_and(|n| playouts >= n) || (playouts > 0 && limits.stopped()) {
            break;
        }
        if playouts % 64 == 0 && playouts > 0 && limits.out_of_time(start) {
            break;
        }
        run.playout();
        playouts += 1;
        if let Some(sink) = info.as_mut() {
            if playouts % params.info_interval.max(1) == 0 {
                sink(&run.info(playouts, start));
            }
        }
    }
    let report = run.info(playouts, start);
    if let Some(sink) = info.as_mut() {
        sink(&report);
    }

    let root = &run.tree.nodes[0];
    let u = (-root.w / root.n as f64).clamp(-1.0, 1.0);
    let d = (root.draw / root.n as f64).clamp(0.0, 1.0 - u.abs());
    let value = [(1.0 - d + u) / 2.0, (1.0 - d - u) / 2.0, d];
    let mut root_moves: Vec<RootMove> = run
        .root_entries()
        .into_iter()
        .map(|(mv, prior, n, w, _)| RootMove {
            mv,
            prior,
            visits: n,
            q: if n > 0 { w / n as f64 } else { 0.0 },
        })
        .collect();
    root_moves.sort_by(|a, b| b.visits.cmp(&a.visits));
    let result = SearchResult {
        best_move: report.best_move,
        pv: report.pv,
        value,
        score: None,
        nodes: playouts,
        depth: report.depth,
        elapsed_ms: start.elapsed().as_millis() as u64,
        root_moves,
    };
    Ok((result, run.tree))
}

/// MCTS backend owning its evaluator.
pub struct Mcts<E> {
    pub params: MctsParams,
    pub eval: E,
}

impl<E: Evaluator> Mcts<E> {
    pub fn new(params: MctsParams, eval: E) -> Mcts<E> {
        Mcts { params, eval }
    }
}

impl<E: Evaluator> Searcher for Mcts<E> {
    fn search(
        &mut self,
        board: &Board,
        limits: &Limits,
        info: Option<InfoSink<'_>>,
    ) -> Result<SearchResult, SearchError> {
        run_search(board, &mut self.eval, &self.params, limits, info).map(|(r, _)| r)
    }

    fn evaluator_mut(&mut self) -> &mut dyn Evaluator {
        &mut self.eval
    }

    fn name(&self) -> String {
        format!("mcts/{}", self.eval.name())
    }
}
