//! Victory by continuous fours.
//!
//! The attacker (side to move) only plays moves that create a five
//! threat; the defender's only reply is the blocking cell. The search
//! deepens one attacker move at a time, so the first win found is the
//! shortest one. Results depend only on the position and the limits.

use std::collections::HashMap;

use crate::board::{Board, Move};
use crate::threats::{five_cells, five_cells_after, four_moves};

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct VcfResult {
    /// Plies until the attacker completes five, when a win was proven.
    pub plies: Option<u32>,
    /// Positions visited.
    pub nodes: u64,
    /// Winning line, attacker and defender moves alternating.
    pub line: Vec<Move>,
    /// The node cap was reached before a proof was found.
    pub exhausted: bool,
}

struct Solver {
    nodes: u64,
    cap: u64,
    line: Vec<Move>,
    /// Positions with no win within the stored number of plies.
    failed: HashMap<u64, u32>,
}

impl Solver {
    fn prove(&mut self, board: &mut Board, remaining: u32) -> Option<u32> {
        self.nodes += 1;
        let me = board.side_to_move();
        let opp = me.opponent();
        if let Some(&f) = five_cells(board, me).first() {
            self.line.push(f);
            return Some(1);
        }
        if remaining < 3 || self.nodes >= self.cap {
            return None;
        }
        if self.failed.get(&board.hash()).is_some_and(|&r| r >= remaining) {
            return None;
        }
        let threats = five_cells(board, opp);
        let candidates: Vec<Move> = match threats.len() {
            0 => {
                let mut fours = four_moves(board, me);
                // Double threats first, then board order.
                fours.sort_by(|a, b| b.1.cmp(&a.1));
                fours.into_iter().map(|(m, _)| m).collect()
            }
            1 if !five_cells_after(board, threats[0], me, &[]).is_empty() => vec![threats[0]],
            _ => Vec::new(),
        };
        for c in candidates {
            board.place(c).expect("candidate is empty");
            let fives = five_cells(board, me);
            let found = match fives.len() {
                0 => None,
                1 => {
                    let block = fives[0];
                    board.place(block).expect("block is empty");
                    let r = self.prove(board, remaining - 2);
                    board.undo().expect("undo block");
                    r.map(|k| {
                        self.line.push(block);
                        k + 2
                    })
                }
                _ => {
                    self.line.push(fives[1]);
                    self.line.push(fives[0]);
                    Some(3)
                }
            };
            board.undo().expect("undo attack");
            if let Some(k) = found {
                self.line.push(c);
                return Some(k);
            }
            if self.nodes >= self.cap {
                return None;
            }
        }
        self.failed.insert(board.hash(), remaining);
        None
    }
}

/// Searches for a continuous-four win of the side to move within
/// `max_plies` plies and `node_cap` visited positions.
pub fn vcf(board: &mut Board, max_plies: u32, node_cap: u64) -> VcfResult {
    let mut solver = Solver {
        nodes: 0,
        cap: node_cap.max(1),
        line: Vec::new(),
        failed: HashMap::new(),
    };
    if board.outcome().is_over() {
        return VcfResult::default();
    }
    let mut limit = 1;
    while limit <= max_plies.max(1) {
        solver.line.clear();
        if let Some(k) = solver.prove(board, limit) {
            solver.line.reverse();
            return VcfResult {
                plies: Some(k),
                nodes: solver.nodes,
                line: solver.line,
                exhausted: false,
            };
        }
        if solver.nodes >= solver.cap {
            return VcfResult {
                nodes: solver.nodes,
                exhausted: true,
                ..VcfResult::default()
            };
        }
        limit += 2;
    }
    VcfResult {
        nodes: solver.nodes,
        ..VcfResult::default()
    }
}
