//! Line-threat detection: fives, fours and open threes.
//!
//! Functions take the color explicitly so they can ask about either side
//! regardless of whose turn it is. Hypothetical stones are passed as an
//! `extra` list instead of mutating the board.

use crate::board::{Board, Cell, Color, Move, DIRECTIONS};

/// Length of the run of `color` through `at` along `(dr, dc)`, counting
/// `at` and every cell of `extra` as `color`.
pub fn run_through(board: &Board, at: Move, (dr, dc): (isize, isize), color: Color, extra: &[Move]) -> usize {
    let own = |r: isize, c: isize| -> bool {
        if !board.in_bounds(r, c) {
            return false;
        }
        let m = Move::new(r as usize, c as usize);
        board.at(m) == color.cell() || extra.contains(&m)
    };
    let (r0, c0) = (at.row() as isize, at.col() as isize);
    let mut n = 1;
    for sign in [1isize, -1] {
        let (mut r, mut c) = (r0 + sign * dr, c0 + sign * dc);
        while own(r, c) {
            n += 1;
            r += sign * dr;
            c += sign * dc;
        }
    }
    n
}

/// True when `color` playing the empty cell `mv` completes five or more.
pub fn makes_five(board: &Board, mv: Move, color: Color) -> bool {
    DIRECTIONS
        .iter()
        .any(|&d| run_through(board, mv, d, color, &[]) >= 5)
}

/// Calls `f` with the empty cells of every five-cell window that holds
/// exactly `own` stones of `color` and none of the opponent.
fn scan_windows(board: &Board, color: Color, own: usize, mut f: impl FnMut(&[usize])) {
    let (h, w) = (board.height() as isize, board.width() as isize);
    let cells = board.cells();
    let (mine, theirs) = (color.cell(), color.opponent().cell());
    let mut empties = [0usize; 5];
    for &(dr, dc) in &DIRECTIONS {
        for r in 0..h {
            for c in 0..w {
                let (er, ec) = (r + 4 * dr, c + 4 * dc);
                if er < 0 || er >= h || ec < 0 || ec >= w {
                    continue;
                }
                let (mut n_own, mut n_empty) = (0, 0);
                let mut blocked = false;
                for k in 0..5 {
                    let i = ((r + k * dr) * w + c + k * dc) as usize;
                    let v = cells[i];
                    if v == mine {
                        n_own += 1;
                    } else if v == theirs {
                        blocked = true;
                        break;
                    } else {
                        empties[n_empty] = i;
                        n_empty += 1;
                    }
                }
                if !blocked && n_own == own {
                    f(&empties[..n_empty]);
                }
            }
        }
    }
}

/// Empty cells where `color` would complete five, in index order.
pub fn five_cells(board: &Board, color: Color) -> Vec<Move> {
    if board.stone_count(color) < 4 {
        return Vec::new();
    }
    let mut idx = Vec::new();
    scan_windows(board, color, 4, |e| idx.push(e[0]));
    idx.sort_unstable();
    idx.dedup();
    idx.into_iter().map(|i| board.move_at(i)).collect()
}

/// Whether `color` has at least one five cell.
pub fn has_five_cell(board: &Board, color: Color) -> bool {
    let mut found = false;
    if board.stone_count(color) >= 4 {
        scan_windows(board, color, 4, |_| found = true);
    }
    found
}

fn line_cells(board: &Board, mv: Move, (dr, dc): (isize, isize)) -> impl Iterator<Item = Move> + '_ {
    let (r0, c0) = (mv.row() as isize, mv.col() as isize);
    (-4isize..=4).filter(|&k| k != 0).filter_map(move |k| {
        let (r, c) = (r0 + k * dr, c0 + k * dc);
        if board.in_bounds(r, c) && board.get(r as usize, c as usize) == Cell::Empty {
            Some(Move::new(r as usize, c as usize))
        } else {
            None
        }
    })
}

/// Five cells of `color` on the lines through `mv` once `color` plays
/// `mv` (plus `extra`). Sorted and deduplicated.
pub fn five_cells_after(board: &Board, mv: Move, color: Color, extra: &[Move]) -> Vec<Move> {
    let mut stones = extra.to_vec();
    stones.push(mv);
    let mut out = Vec::new();
    for &d in &DIRECTIONS {
        for e in line_cells(board, mv, d) {
            if stones.contains(&e) {
                continue;
            }
            if run_through(board, e, d, color, &stones) >= 5 && !out.contains(&e) {
                out.push(e);
            }
        }
    }
    out.sort_by_key(|m| (m.row(), m.col()));
    out
}

/// Moves of `color` that do not win at once but create new five cells,
/// with the number of five cells they create. Index order.
pub fn four_moves(board: &Board, color: Color) -> Vec<(Move, usize)> {
    if board.stone_count(color) < 3 {
        return Vec::new();
    }
    // (move, created five cell) pairs from windows with three stones.
    let mut pairs = Vec::new();
    scan_windows(board, color, 3, |e| {
        pairs.push((e[0], e[1]));
        pairs.push((e[1], e[0]));
    });
    pairs.sort_unstable();
    pairs.dedup();
    let mut out: Vec<(Move, usize)> = Vec::new();
    for (m, _) in pairs {
        match out.last_mut() {
            Some((last, n)) if board.index(*last) == m => *n += 1,
            _ => out.push((board.move_at(m), 1)),
        }
    }
    out.retain(|&(m, _)| !makes_five(board, m, color));
    out
}

/// Does `color` playing `mv` leave a follow-up that makes an open four
/// (two five cells on one line) through `mv`.
pub fn makes_open_three(board: &Board, mv: Move, color: Color) -> bool {
    for &d in &DIRECTIONS {
        for e in line_cells(board, mv, d) {
            let stones = [mv, e];
            let fives = line_cells(board, mv, d)
                .filter(|f| *f != e && run_through(board, *f, d, color, &stones) >= 5)
                .count();
            if fives >= 2 {
                return true;
            }
        }
    }
    false
}

/// Ordering score of `mv` for `color`: higher for stronger shapes made
/// or blocked.
pub fn threat_score(board: &Board, mv: Move, color: Color) -> i32 {
    let opp = color.opponent();
    if makes_five(board, mv, color) {
        return 100_000;
    }
    if makes_five(board, mv, opp) {
        return 50_000;
    }
    let own_fours = five_cells_after(board, mv, color, &[]).len() as i32;
    let mut score = 0;
    if own_fours >= 2 {
        score += 20_000;
    } else if own_fours == 1 {
        score += 3_000;
    }
    if makes_open_three(board, mv, color) {
        score += 2_000;
    }
    let opp_fours = five_cells_after(board, mv, opp, &[]).len() as i32;
    score += 1_500 * opp_fours.min(2);
    if makes_open_three(board, mv, opp) {
        score += 1_000;
    }
    for &d in &DIRECTIONS {
        let own = run_through(board, mv, d, color, &[]) as i32;
        let their = run_through(board, mv, d, opp, &[]) as i32;
        score += (own - 1) * (own - 1) * 10 + (their - 1) * (their - 1) * 6;
    }
    score
}
