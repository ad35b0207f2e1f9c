//! Directional line patterns and their canonical indices.
//!
//! A line pattern is the window of up to five cells on each side of a
//! center cell along one direction, truncated at the board edge. Cells are
//! encoded relative to a perspective color: `0` empty, `1` own stone, `2`
//! opponent stone.
//!
//! # Index layout
//!
//! Patterns are grouped into blocks by `(left, right)` extent, ordered
//! lexicographically from `(0, 0)` to `(5, 5)`. Block `(l, r)` holds
//! `3^(l + 1 + r)` patterns and starts at [`BASE`]`[l][r]`. Within a block,
//! the index is the base-3 little-endian value of the cells read from the
//! most negative offset to the most positive one. The total is
//! [`NUM_PATTERNS`] `= 397488`.

use crate::board::{Board, Cell, Color, Move};

/// Maximum number of cells on either side of the center.
pub const HALF: usize = 5;
/// Maximum pattern length.
pub const SPAN: usize = 2 * HALF + 1;

const fn pow3(n: usize) -> u32 {
    let mut v = 1u32;
    let mut i = 0;
    while i < n {
        v *= 3;
        i += 1;
    }
    v
}

const fn build_base() -> ([[u32; HALF + 1]; HALF + 1], u32) {
    let mut base = [[0u32; HALF + 1]; HALF + 1];
    let mut acc = 0u32;
    let mut l = 0;
    while l <= HALF {
        let mut r = 0;
        while r <= HALF {
            base[l][r] = acc;
            acc += pow3(l + 1 + r);
            r += 1;
        }
        l += 1;
    }
    (base, acc)
}

const BASE_AND_TOTAL: ([[u32; HALF + 1]; HALF + 1], u32) = build_base();

/// First index of each `(left, right)` block.
pub const BASE: [[u32; HALF + 1]; HALF + 1] = BASE_AND_TOTAL.0;

/// Number of distinct border-truncated line patterns.
pub const NUM_PATTERNS: usize = BASE_AND_TOTAL.1 as usize;

/// Powers of three up to `3^SPAN`.
pub const POW3: [u32; SPAN + 1] = {
    let mut p = [0u32; SPAN + 1];
    let mut i = 0;
    while i <= SPAN {
        p[i] = pow3(i);
        i += 1;
    }
    p
};

/// Mapping-function group that a direction belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Group {
    /// Horizontal and vertical lines.
    Hv = 0,
    /// Both diagonals.
    Di = 1,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    Horizontal,
    Vertical,
    Diagonal,
    AntiDiagonal,
}

impl Direction {
    pub const ALL: [Direction; 4] = [
        Direction::Horizontal,
        Direction::Vertical,
        Direction::Diagonal,
        Direction::AntiDiagonal,
    ];

    /// `(d_row, d_col)` step.
    #[inline]
    pub fn step(self) -> (isize, isize) {
        match self {
            Direction::Horizontal => (0, 1),
            Direction::Vertical => (1, 0),
            Direction::Diagonal => (1, 1),
            Direction::AntiDiagonal => (1, -1),
        }
    }

    #[inline]
    pub fn group(self) -> Group {
        match self {
            Direction::Horizontal | Direction::Vertical => Group::Hv,
            Direction::Diagonal | Direction::AntiDiagonal => Group::Di,
        }
    }

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }
}

/// A border-truncated line window, perspective-encoded.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct LinePattern {
    left: u8,
    right: u8,
    cells: [u8; SPAN],
}

impl LinePattern {
    /// Builds a pattern from its extents and digits (`0..3`), ordered from
    /// the negative side. Returns `None` if the shape is invalid.
    pub fn new(left: usize, right: usize, digits: &[u8]) -> Option<LinePattern> {
        if left > HALF || right > HALF || digits.len() != left + 1 + right {
            return None;
        }
        if digits.iter().any(|&d| d > 2) {
            return None;
        }
        let mut cells = [0u8; SPAN];
        cells[..digits.len()].copy_from_slice(digits);
        Some(LinePattern {
            left: left as u8,
            right: right as u8,
            cells,
        })
    }

    #[inline]
    pub fn left(&self) -> usize {
        self.left as usize
    }

    #[inline]
    pub fn right(&self) -> usize {
        self.right as usize
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.left() + 1 + self.right()
    }

    /// Patterns always contain the center cell.
    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Digits ordered from the negative side; the center is at `left()`.
    #[inline]
    pub fn cells(&self) -> &[u8] {
        &self.cells[..self.len()]
    }

    /// Canonical index of this pattern.
    #[inline]
    pub fn index(&self) -> u32 {
        let mut id = 0u32;
        for (k, &d) in self.cells().iter().enumerate() {
            id += d as u32 * POW3[k];
        }
        BASE[self.left()][self.right()] + id
    }

    /// Inverse of [`LinePattern::index`].
    pub fn from_index(id: u32) -> Option<LinePattern> {
        if id as usize >= NUM_PATTERNS {
            return None;
        }
        // Blocks are contiguous and increasing in (left, right) order.
        let mut block = (0, 0);
        'outer: for l in (0..=HALF).rev() {
            for r in (0..=HALF).rev() {
                if BASE[l][r] <= id {
                    block = (l, r);
                    break 'outer;
                }
            }
        }
        let (l, r) = block;
        let mut rest = id - BASE[l][r];
        let mut cells = [0u8; SPAN];
        for c in cells.iter_mut().take(l + 1 + r) {
            *c = (rest % 3) as u8;
            rest /= 3;
        }
        Some(LinePattern {
            left: l as u8,
            right: r as u8,
            cells,
        })
    }
}

/// Digit of `cell` as seen by `perspective`.
#[inline]
pub fn relative_digit(cell: Cell, perspective: Color) -> u8 {
    match cell.color() {
        None => 0,
        Some(c) if c == perspective => 1,
        Some(_) => 2,
    }
}

/// On-board extents `(left, right)` of the window through `(row, col)`.
#[inline]
pub fn extents(height: usize, width: usize, row: usize, col: usize, dir: Direction) -> (usize, usize) {
    let (dr, dc) = dir.step();
    let reach = |sign: isize| {
        let mut k = 0;
        while k < HALF {
            let r = row as isize + sign * dr * (k as isize + 1);
            let c = col as isize + sign * dc * (k as isize + 1);
            if r < 0 || c < 0 || r >= height as isize || c >= width as isize {
                break;
            }
            k += 1;
        }
        k
    };
    (reach(-1), reach(1))
}

/// The line pattern through `(row, col)` along `dir`, seen by `perspective`.
pub fn extract_pattern(
    board: &Board,
    row: usize,
    col: usize,
    dir: Direction,
    perspective: Color,
) -> LinePattern {
    let (left, right) = extents(board.height(), board.width(), row, col, dir);
    let (dr, dc) = dir.step();
    let mut cells = [0u8; SPAN];
    for (i, k) in (-(left as isize)..=right as isize).enumerate() {
        let r = (row as isize + k * dr) as usize;
        let c = (col as isize + k * dc) as usize;
        cells[i] = relative_digit(board.get(r, c), perspective);
    }
    LinePattern {
        left: left as u8,
        right: right as u8,
        cells,
    }
}

/// Index of the pattern through `(row, col)` along `dir` without
/// materializing the pattern.
#[inline]
pub fn pattern_index_at(
    board: &Board,
    row: usize,
    col: usize,
    dir: Direction,
    perspective: Color,
) -> u32 {
    let (left, right) = extents(board.height(), board.width(), row, col, dir);
    let (dr, dc) = dir.step();
    let mut id = BASE[left][right];
    let mut r = row as isize - left as isize * dr;
    let mut c = col as isize - left as isize * dc;
    for k in 0..left + 1 + right {
        id += relative_digit(board.get(r as usize, c as usize), perspective) as u32 * POW3[k];
        r += dr;
        c += dc;
    }
    id
}

/// Every `(cell, direction)` whose line pattern contains `(row, col)`.
/// At most 44 entries; exactly 44 when the cell is at least five from
/// every edge.
pub fn affected_cells(height: usize, width: usize, row: usize, col: usize) -> Vec<(Move, Direction)> {
    let mut out = Vec::with_capacity(4 * SPAN);
    for dir in Direction::ALL {
        let (left, right) = extents(height, width, row, col, dir);
        let (dr, dc) = dir.step();
        for k in -(left as isize)..=right as isize {
            let r = (row as isize + k * dr) as usize;
            let c = (col as isize + k * dc) as usize;
            out.push((Move::new(r, c), dir));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashSet;

    #[test]
    fn pattern_count_matches_closed_form() {
        let mut n = 0usize;
        for i in 0..=5u32 {
            for j in 0..=5u32 {
                n += 3usize.pow(i + 1 + j);
            }
        }
        assert_eq!(n, 397_488);
        assert_eq!(NUM_PATTERNS, n);
    }

    #[test]
    fn base_is_cumulative() {
        let mut acc = 0u32;
        for l in 0..=HALF {
            for r in 0..=HALF {
                assert_eq!(BASE[l][r], acc);
                acc += 3u32.pow((l + 1 + r) as u32);
            }
        }
    }

    #[test]
    fn first_and_interior_empty_ids() {
        let p = LinePattern::new(0, 0, &[0]).unwrap();
        assert_eq!(p.index(), 0);
        let p = LinePattern::new(5, 5, &[0; 11]).unwrap();
        assert_eq!(p.index(), BASE[5][5]);
        assert_eq!(BASE[5][5] as usize, NUM_PATTERNS - 3usize.pow(11));
    }

    #[test]
    fn index_round_trip_exhaustive() {
        for id in 0..NUM_PATTERNS as u32 {
            let p = LinePattern::from_index(id).unwrap();
            assert_eq!(p.index(), id);
        }
        assert!(LinePattern::from_index(NUM_PATTERNS as u32).is_none());
    }

    #[test]
    fn interior_and_corner_extents() {
        let mut b = Board::default();
        b.place(Move::new(7, 7)).unwrap();
        for dir in Direction::ALL {
            let p = extract_pattern(&b, 7, 7, dir, Color::Black);
            assert_eq!((p.left(), p.right(), p.len()), (5, 5, 11));
            assert_eq!(p.cells()[5], 1);
        }
        let p = extract_pattern(&b, 0, 0, Direction::Horizontal, Color::Black);
        assert_eq!((p.left(), p.right(), p.len()), (0, 5, 6));
    }

    #[test]
    fn empty_board_patterns_have_geometric_extents() {
        let b = Board::default();
        for r in 0..15usize {
            for c in 0..15usize {
                for dir in Direction::ALL {
                    let (dr, dc) = dir.step();
                    // Count on-board cells independently of `extents`.
                    let count = |sign: isize| {
                        (1..=5)
                            .filter(|&k| {
                                let y = r as isize + sign * dr * k;
                                let x = c as isize + sign * dc * k;
                                (0..15).contains(&y) && (0..15).contains(&x)
                            })
                            .count()
                    };
                    let p = extract_pattern(&b, r, c, dir, Color::White);
                    assert_eq!(p.left(), count(-1));
                    assert_eq!(p.right(), count(1));
                    assert!(p.cells().iter().all(|&d| d == 0));
                    assert_eq!(p.index(), pattern_index_at(&b, r, c, dir, Color::White));
                }
            }
        }
    }

    #[test]
    fn affected_cell_counts() {
        assert_eq!(affected_cells(15, 15, 7, 7).len(), 44);
        assert_eq!(affected_cells(15, 15, 0, 0).len(), 19);
        for r in 0..15 {
            for c in 0..15 {
                let list = affected_cells(15, 15, r, c);
                assert!(list.len() <= 44);
                let set: HashSet<_> = list.iter().collect();
                assert_eq!(set.len(), list.len());
            }
        }
    }

    #[test]
    fn affected_windows_contain_the_move() {
        for (r, c) in [(0, 0), (7, 7), (3, 12), (14, 1)] {
            for (cell, dir) in affected_cells(15, 15, r, c) {
                let (left, right) = extents(15, 15, cell.row(), cell.col(), dir);
                let (dr, dc) = dir.step();
                let hit = (-(left as isize)..=right as isize).any(|k| {
                    cell.row() as isize + k * dr == r as isize
                        && cell.col() as isize + k * dc == c as isize
                });
                assert!(hit);
            }
        }
    }

    #[test]
    fn locality_completeness_against_full_extraction() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..300 {
            let mut b = Board::default();
            for _ in 0..rng.gen_range(0..40) {
                let mv = *b.legal_moves().choose(&mut rng).unwrap();
                b.place(mv).unwrap();
                if b.outcome().is_over() {
                    b.undo().unwrap();
                }
            }
            let snapshot = |b: &Board| {
                let mut v = Vec::new();
                for r in 0..15 {
                    for c in 0..15 {
                        for dir in Direction::ALL {
                            v.push(pattern_index_at(b, r, c, dir, Color::Black));
                        }
                    }
                }
                v
            };
            let before = snapshot(&b);
            let mv = *b.legal_moves().choose(&mut rng).unwrap();
            b.place(mv).unwrap();
            let after = snapshot(&b);
            let changed: HashSet<(usize, usize)> = (0..before.len())
                .filter(|&i| before[i] != after[i])
                .map(|i| (i / 4, i % 4))
                .collect();
            let expected: HashSet<(usize, usize)> = affected_cells(15, 15, mv.row(), mv.col())
                .into_iter()
                .map(|(cell, dir)| (cell.row() * 15 + cell.col(), dir.index()))
                .collect();
            assert_eq!(changed, expected);
        }
    }

    #[test]
    fn perspective_duality() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut b = Board::default();
        for _ in 0..30 {
            let mv = *b.legal_moves().choose(&mut rng).unwrap();
            if b.place(mv).unwrap().is_over() {
                b.undo().unwrap();
            }
        }
        let s = b.color_swapped();
        for r in 0..15 {
            for c in 0..15 {
                for dir in Direction::ALL {
                    assert_eq!(
                        extract_pattern(&b, r, c, dir, Color::Black),
                        extract_pattern(&s, r, c, dir, Color::White)
                    );
                }
            }
        }
    }
}
