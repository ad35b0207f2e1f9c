//! Game state, rules and incremental Zobrist hashing.
//!
//! Coordinates are zero-based `(row, col)`. The win rule is freestyle: five
//! or more stones of one color in a row, horizontally, vertically or along
//! either diagonal.

use std::fmt;
use std::str::FromStr;

use once_cell::sync::Lazy;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Smallest supported board edge.
pub const MIN_SIZE: usize = 5;
/// Largest supported board edge.
pub const MAX_SIZE: usize = 32;
/// Standard board edge.
pub const DEFAULT_SIZE: usize = 15;

/// Seed of the Zobrist key generator. Keys are reproducible across builds.
pub const ZOBRIST_SEED: u64 = 0x4d49_584e_4554_5a42;

/// Contents of one intersection. The numeric codes double as base-3 digits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
#[repr(u8)]
pub enum Cell {
    #[default]
    Empty = 0,
    Black = 1,
    White = 2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
#[repr(u8)]
pub enum Color {
    Black = 0,
    White = 1,
}

impl Color {
    #[inline]
    pub fn opponent(self) -> Color {
        match self {
            Color::Black => Color::White,
            Color::White => Color::Black,
        }
    }

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    #[inline]
    pub fn cell(self) -> Cell {
        match self {
            Color::Black => Cell::Black,
            Color::White => Cell::White,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Color::Black => "black",
            Color::White => "white",
        }
    }
}

impl Cell {
    #[inline]
    pub fn color(self) -> Option<Color> {
        match self {
            Cell::Empty => None,
            Cell::Black => Some(Color::Black),
            Cell::White => Some(Color::White),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GameOutcome {
    Ongoing,
    BlackWin,
    WhiteWin,
    Draw,
}

impl GameOutcome {
    pub fn win_for(color: Color) -> GameOutcome {
        match color {
            Color::Black => GameOutcome::BlackWin,
            Color::White => GameOutcome::WhiteWin,
        }
    }

    pub fn is_over(self) -> bool {
        self != GameOutcome::Ongoing
    }

    pub fn winner(self) -> Option<Color> {
        match self {
            GameOutcome::BlackWin => Some(Color::Black),
            GameOutcome::WhiteWin => Some(Color::White),
            _ => None,
        }
    }

    pub fn swapped(self) -> GameOutcome {
        match self {
            GameOutcome::BlackWin => GameOutcome::WhiteWin,
            GameOutcome::WhiteWin => GameOutcome::BlackWin,
            other => other,
        }
    }
}

/// A board coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Move {
    pub row: u8,
    pub col: u8,
}

impl Move {
    #[inline]
    pub fn new(row: usize, col: usize) -> Move {
        Move {
            row: row as u8,
            col: col as u8,
        }
    }

    #[inline]
    pub fn row(self) -> usize {
        self.row as usize
    }

    #[inline]
    pub fn col(self) -> usize {
        self.col as usize
    }
}

impl fmt::Display for Move {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.row, self.col)
    }
}

impl FromStr for Move {
    type Err = BoardError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (r, c) = s
            .trim()
            .split_once(',')
            .ok_or_else(|| BoardError::Parse(format!("bad move `{s}`")))?;
        let row: usize = r
            .trim()
            .parse()
            .map_err(|_| BoardError::Parse(format!("bad row in `{s}`")))?;
        let col: usize = c
            .trim()
            .parse()
            .map_err(|_| BoardError::Parse(format!("bad col in `{s}`")))?;
        if row >= MAX_SIZE || col >= MAX_SIZE {
            return Err(BoardError::Parse(format!("coordinate out of range `{s}`")));
        }
        Ok(Move::new(row, col))
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BoardError {
    #[error("cell {0} is occupied")]
    OccupiedCell(Move),
    #[error("cell {0} is off the board")]
    OutOfBounds(Move),
    #[error("the game is already over")]
    GameOver,
    #[error("no move to undo")]
    EmptyHistory,
    #[error("unsupported board size {0}x{1}")]
    BadSize(usize, usize),
    #[error("parse error: {0}")]
    Parse(String),
}

struct ZobristKeys {
    cells: Vec<[u64; 2]>,
    side: u64,
}

static ZOBRIST: Lazy<ZobristKeys> = Lazy::new(|| {
    let mut rng = ChaCha8Rng::seed_from_u64(ZOBRIST_SEED);
    let cells = (0..MAX_SIZE * MAX_SIZE)
        .map(|_| [rng.gen::<u64>(), rng.gen::<u64>()])
        .collect();
    ZobristKeys {
        cells,
        side: rng.gen(),
    }
});

#[inline]
fn zobrist_cell(row: usize, col: usize, color: Color) -> u64 {
    ZOBRIST.cells[row * MAX_SIZE + col][color.index()]
}

/// The four line directions as `(d_row, d_col)` steps.
pub const DIRECTIONS: [(isize, isize); 4] = [(0, 1), (1, 0), (1, 1), (1, -1)];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Placed {
    pub mv: Move,
    pub color: Color,
}

#[derive(Clone, Debug)]
pub struct Board {
    height: usize,
    width: usize,
    cells: Vec<Cell>,
    side_to_move: Color,
    history: Vec<Placed>,
    hash: u64,
    outcome: GameOutcome,
}

impl PartialEq for Board {
    fn eq(&self, other: &Self) -> bool {
        self.height == other.height
            && self.width == other.width
            && self.cells == other.cells
            && self.side_to_move == other.side_to_move
            && self.history == other.history
    }
}

impl Eq for Board {}

impl Default for Board {
    fn default() -> Self {
        Board::new(DEFAULT_SIZE, DEFAULT_SIZE).expect("default size is valid")
    }
}

impl Board {
    pub fn new(height: usize, width: usize) -> Result<Board, BoardError> {
        if !(MIN_SIZE..=MAX_SIZE).contains(&height) || !(MIN_SIZE..=MAX_SIZE).contains(&width) {
            return Err(BoardError::BadSize(height, width));
        }
        Ok(Board {
            height,
            width,
            cells: vec![Cell::Empty; height * width],
            side_to_move: Color::Black,
            history: Vec::new(),
            hash: 0,
            outcome: GameOutcome::Ongoing,
        })
    }

    /// Replays `moves` from the empty board.
    pub fn from_moves(height: usize, width: usize, moves: &[Move]) -> Result<Board, BoardError> {
        let mut board = Board::new(height, width)?;
        for &mv in moves {
            board.place(mv)?;
        }
        Ok(board)
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn area(&self) -> usize {
        self.height * self.width
    }

    #[inline]
    pub fn side_to_move(&self) -> Color {
        self.side_to_move
    }

    #[inline]
    pub fn hash(&self) -> u64 {
        self.hash
    }

    #[inline]
    pub fn outcome(&self) -> GameOutcome {
        self.outcome
    }

    #[inline]
    pub fn history(&self) -> &[Placed] {
        &self.history
    }

    #[inline]
    pub fn ply(&self) -> usize {
        self.history.len()
    }

    pub fn last_move(&self) -> Option<Move> {
        self.history.last().map(|p| p.mv)
    }

    pub fn moves(&self) -> Vec<Move> {
        self.history.iter().map(|p| p.mv).collect()
    }

    #[inline]
    pub fn in_bounds(&self, row: isize, col: isize) -> bool {
        row >= 0 && col >= 0 && (row as usize) < self.height && (col as usize) < self.width
    }

    #[inline]
    pub fn contains(&self, mv: Move) -> bool {
        mv.row() < self.height && mv.col() < self.width
    }

    #[inline]
    pub fn index(&self, mv: Move) -> usize {
        mv.row() * self.width + mv.col()
    }

    #[inline]
    pub fn move_at(&self, index: usize) -> Move {
        Move::new(index / self.width, index % self.width)
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Cell {
        self.cells[row * self.width + col]
    }

    #[inline]
    pub fn at(&self, mv: Move) -> Cell {
        self.cells[self.index(mv)]
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn stone_count(&self, color: Color) -> usize {
        let c = color.cell();
        self.cells.iter().filter(|&&x| x == c).count()
    }

    pub fn is_full(&self) -> bool {
        self.history.len() == self.area()
    }

    /// Hash recomputed from the cells and side to move.
    pub fn hash_from_scratch(&self) -> u64 {
        let mut h = 0;
        for r in 0..self.height {
            for c in 0..self.width {
                if let Some(color) = self.get(r, c).color() {
                    h ^= zobrist_cell(r, c, color);
                }
            }
        }
        if self.side_to_move == Color::White {
            h ^= ZOBRIST.side;
        }
        h
    }

    /// Places a stone for the side to move.
    pub fn place(&mut self, mv: Move) -> Result<GameOutcome, BoardError> {
        if !self.contains(mv) {
            return Err(BoardError::OutOfBounds(mv));
        }
        if self.outcome.is_over() {
            return Err(BoardError::GameOver);
        }
        let idx = self.index(mv);
        if self.cells[idx] != Cell::Empty {
            return Err(BoardError::OccupiedCell(mv));
        }
        let color = self.side_to_move;
        self.cells[idx] = color.cell();
        self.hash ^= zobrist_cell(mv.row(), mv.col(), color) ^ ZOBRIST.side;
        self.history.push(Placed { mv, color });
        self.side_to_move = color.opponent();
        self.outcome = self.check_win(mv);
        Ok(self.outcome)
    }

    /// Hands the turn to the opponent without placing a stone. Used by
    /// null-move search; calling it twice restores the position.
    pub fn pass_turn(&mut self) {
        self.side_to_move = self.side_to_move.opponent();
        self.hash ^= ZOBRIST.side;
    }

    /// Reverts the most recent move.
    pub fn undo(&mut self) -> Result<Placed, BoardError> {
        let last = self.history.pop().ok_or(BoardError::EmptyHistory)?;
        let idx = self.index(last.mv);
        self.cells[idx] = Cell::Empty;
        self.hash ^= zobrist_cell(last.mv.row(), last.mv.col(), last.color) ^ ZOBRIST.side;
        self.side_to_move = last.color;
        // A game only continues from an ongoing position.
        self.outcome = GameOutcome::Ongoing;
        Ok(last)
    }

    /// Length of the run of `color` through `(row, col)` along `(dr, dc)`,
    /// counting the cell itself.
    pub fn run_length(&self, row: usize, col: usize, dr: isize, dc: isize, color: Cell) -> usize {
        let mut n = 1;
        for sign in [1isize, -1] {
            let (mut r, mut c) = (row as isize + sign * dr, col as isize + sign * dc);
            while self.in_bounds(r, c) && self.get(r as usize, c as usize) == color {
                n += 1;
                r += sign * dr;
                c += sign * dc;
            }
        }
        n
    }

    /// Outcome after `last_move`, scanning only the four lines through it.
    pub fn check_win(&self, last_move: Move) -> GameOutcome {
        let cell = self.at(last_move);
        if let Some(color) = cell.color() {
            for (dr, dc) in DIRECTIONS {
                if self.run_length(last_move.row(), last_move.col(), dr, dc, cell) >= 5 {
                    return GameOutcome::win_for(color);
                }
            }
        }
        if self.is_full() {
            GameOutcome::Draw
        } else {
            GameOutcome::Ongoing
        }
    }

    /// Every empty cell, row-major.
    pub fn legal_moves(&self) -> Vec<Move> {
        if self.outcome.is_over() {
            return Vec::new();
        }
        (0..self.area())
            .filter(|&i| self.cells[i] == Cell::Empty)
            .map(|i| self.move_at(i))
            .collect()
    }

    /// Empty cells within Chebyshev distance `radius` of any stone,
    /// row-major. On an empty board this is the center cell.
    pub fn candidate_moves(&self, radius: usize) -> Vec<Move> {
        if self.outcome.is_over() {
            return Vec::new();
        }
        if self.history.is_empty() {
            return vec![Move::new(self.height / 2, self.width / 2)];
        }
        let mut mark = vec![false; self.area()];
        let r = radius as isize;
        for p in &self.history {
            let (pr, pc) = (p.mv.row() as isize, p.mv.col() as isize);
            for dr in -r..=r {
                for dc in -r..=r {
                    let (y, x) = (pr + dr, pc + dc);
                    if self.in_bounds(y, x) {
                        mark[y as usize * self.width + x as usize] = true;
                    }
                }
            }
        }
        (0..self.area())
            .filter(|&i| mark[i] && self.cells[i] == Cell::Empty)
            .map(|i| self.move_at(i))
            .collect()
    }

    /// The same position with every stone's color exchanged.
    pub fn color_swapped(&self) -> Board {
        let mut out = Board::new(self.height, self.width).expect("size already validated");
        for c in out.cells.iter_mut().zip(&self.cells) {
            *c.0 = match c.1 {
                Cell::Empty => Cell::Empty,
                Cell::Black => Cell::White,
                Cell::White => Cell::Black,
            };
        }
        out.history = self
            .history
            .iter()
            .map(|p| Placed {
                mv: p.mv,
                color: p.color.opponent(),
            })
            .collect();
        out.side_to_move = self.side_to_move.opponent();
        out.hash = out.hash_from_scratch();
        out.outcome = self.outcome.swapped();
        out
    }

    /// Parses the text position format: one line per row of `.`, `x`
    /// (black) and `o` (white), followed by a line `black` or `white`
    /// naming the side to move. Blank lines and `#` comments are skipped.
    ///
    /// The move history is rebuilt in row-major order, alternating colors
    /// where possible, so undo works on parsed boards.
    pub fn parse_position(text: &str) -> Result<Board, BoardError> {
        let mut rows: Vec<Vec<Cell>> = Vec::new();
        let mut side = None;
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            match line.to_ascii_lowercase().as_str() {
                "black" if side.is_none() => side = Some(Color::Black),
                "white" if side.is_none() => side = Some(Color::White),
                _ => {
                    if side.is_some() {
                        return Err(BoardError::Parse("rows after side-to-move line".into()));
                    }
                    let row = line
                        .chars()
                        .filter(|c| !c.is_whitespace())
                        .map(|ch| match ch {
                            '.' | '_' => Ok(Cell::Empty),
                            'x' | 'X' => Ok(Cell::Black),
                            'o' | 'O' => Ok(Cell::White),
                            other => Err(BoardError::Parse(format!("bad cell `{other}`"))),
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    rows.push(row);
                }
            }
        }
        let height = rows.len();
        let width = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != width) {
            return Err(BoardError::Parse("ragged rows".into()));
        }
        let side = side.ok_or_else(|| BoardError::Parse("missing side-to-move line".into()))?;
        Board::from_cells(height, width, |r, c| rows[r][c], side)
    }

    /// Builds a board from a cell function and side to move. Returns a
    /// parse error when stone counts cannot arise from alternating play.
    pub fn from_cells(
        height: usize,
        width: usize,
        cell: impl Fn(usize, usize) -> Cell,
        side: Color,
    ) -> Result<Board, BoardError> {
        let mut board = Board::new(height, width)?;
        let mut blacks = Vec::new();
        let mut whites = Vec::new();
        for r in 0..height {
            for c in 0..width {
                match cell(r, c) {
                    Cell::Black => blacks.push(Move::new(r, c)),
                    Cell::White => whites.push(Move::new(r, c)),
                    Cell::Empty => {}
                }
            }
        }
        let (first, second, first_color) = match side {
            Color::Black if blacks.len() == whites.len() => (blacks, whites, Color::Black),
            Color::White if blacks.len() == whites.len() + 1 => (blacks, whites, Color::Black),
            Color::White if blacks.len() == whites.len() => (whites, blacks, Color::White),
            Color::Black if whites.len() == blacks.len() + 1 => (whites, blacks, Color::White),
            _ => {
                return Err(BoardError::Parse(format!(
                    "stone counts {}/{} inconsistent with {} to move",
                    blacks.len(),
                    whites.len(),
                    side.name()
                )))
            }
        };
        board.side_to_move = first_color;
        let mut a = first.into_iter();
        let mut b = second.into_iter();
        // Stones are laid down without win checks; the final outcome is
        // derived from the full position below.
        loop {
            let next = a.next();
            let Some(mv) = next else { break };
            board.put_unchecked(mv);
            if let Some(mv) = b.next() {
                board.put_unchecked(mv);
            }
        }
        board.outcome = board.outcome_full_scan();
        Ok(board)
    }

    fn put_unchecked(&mut self, mv: Move) {
        let color = self.side_to_move;
        let idx = self.index(mv);
        self.cells[idx] = color.cell();
        self.hash ^= zobrist_cell(mv.row(), mv.col(), color) ^ ZOBRIST.side;
        self.history.push(Placed { mv, color });
        self.side_to_move = color.opponent();
    }

    /// Outcome from a scan of the whole board.
    pub fn outcome_full_scan(&self) -> GameOutcome {
        let mut found = None;
        for r in 0..self.height {
            for c in 0..self.width {
                let cell = self.get(r, c);
                let Some(color) = cell.color() else { continue };
                for (dr, dc) in DIRECTIONS {
                    let mut n = 0;
                    let (mut y, mut x) = (r as isize, c as isize);
                    while self.in_bounds(y, x) && self.get(y as usize, x as usize) == cell {
                        n += 1;
                        y += dr;
                        x += dc;
                    }
                    if n >= 5 {
                        found.get_or_insert(color);
                    }
                }
            }
        }
        match found {
            Some(color) => GameOutcome::win_for(color),
            None if self.is_full() => GameOutcome::Draw,
            None => GameOutcome::Ongoing,
        }
    }

    /// Renders the text position format accepted by [`Board::parse_position`].
    pub fn to_position_text(&self) -> String {
        let mut s = String::with_capacity(self.area() + 2 * self.height + 8);
        for r in 0..self.height {
            for c in 0..self.width {
                s.push(match self.get(r, c) {
                    Cell::Empty => '.',
                    Cell::Black => 'x',
                    Cell::White => 'o',
                });
            }
            s.push('\n');
        }
        s.push_str(self.side_to_move.name());
        s.push('\n');
        s
    }
}

impl fmt::Display for Board {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_position_text())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::SliceRandom;

    fn random_game(rng: &mut ChaCha8Rng, max_plies: usize) -> Board {
        let mut b = Board::default();
        for _ in 0..max_plies {
            let moves = b.legal_moves();
            if moves.is_empty() {
                break;
            }
            b.place(*moves.choose(rng).unwrap()).unwrap();
        }
        b
    }

    #[test]
    fn first_move() {
        let mut b = Board::default();
        b.place(Move::new(7, 7)).unwrap();
        assert_eq!(b.stone_count(Color::Black), 1);
        assert_eq!(b.side_to_move(), Color::White);
        assert_eq!(b.get(7, 7), Cell::Black);
    }

    #[test]
    fn occupied_and_out_of_bounds_leave_board_unchanged() {
        let mut b = Board::default();
        b.place(Move::new(7, 7)).unwrap();
        let before = b.clone();
        assert_eq!(
            b.place(Move::new(7, 7)),
            Err(BoardError::OccupiedCell(Move::new(7, 7)))
        );
        assert_eq!(
            b.place(Move::new(15, 0)),
            Err(BoardError::OutOfBounds(Move::new(15, 0)))
        );
        assert_eq!(b, before);
        assert_eq!(b.hash(), before.hash());
    }

    #[test]
    fn game_over_rejects_moves() {
        let mut b = Board::default();
        for i in 0..4 {
            b.place(Move::new(7, i)).unwrap();
            b.place(Move::new(8, i)).unwrap();
        }
        assert_eq!(b.place(Move::new(7, 4)).unwrap(), GameOutcome::BlackWin);
        let before = b.clone();
        assert_eq!(b.place(Move::new(0, 0)), Err(BoardError::GameOver));
        assert_eq!(b, before);
    }

    #[test]
    fn undo_restores_hash_and_side() {
        let mut b = Board::default();
        let h0 = b.hash();
        b.place(Move::new(7, 7)).unwrap();
        b.undo().unwrap();
        assert_eq!(b.hash(), h0);
        assert_eq!(b, Board::default());
        assert_eq!(b.undo(), Err(BoardError::EmptyHistory));
    }

    #[test]
    fn sixty_moves_then_undo_returns_to_empty_hash() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut b = Board::default();
        let empty_hash = b.hash();
        let mut placed = 0;
        while placed < 60 {
            let mv = *b.legal_moves().choose(&mut rng).unwrap();
            b.place(mv).unwrap();
            placed += 1;
            if b.outcome().is_over() {
                b.undo().unwrap();
                placed -= 1;
                // Retry from a different cell.
                continue;
            }
        }
        assert_eq!(b.ply(), 60);
        for _ in 0..60 {
            b.undo().unwrap();
        }
        assert_eq!(b.hash(), empty_hash);
    }

    #[test]
    fn interleaved_place_undo_matches_replay() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut b = Board::default();
        let mut surviving: Vec<Move> = Vec::new();
        for _ in 0..200 {
            if !surviving.is_empty() && (rng.gen_bool(0.35) || b.outcome().is_over()) {
                b.undo().unwrap();
                surviving.pop();
            } else {
                let mv = *b.legal_moves().choose(&mut rng).unwrap();
                b.place(mv).unwrap();
                surviving.push(mv);
            }
            let replay = Board::from_moves(15, 15, &surviving).unwrap();
            assert_eq!(b, replay);
            assert_eq!(b.hash(), replay.hash());
            assert_eq!(b.hash(), b.hash_from_scratch());
        }
    }

    #[test]
    fn five_wins_four_does_not() {
        let mut b = Board::default();
        for i in 0..4 {
            b.place(Move::new(7, 3 + i)).unwrap();
            b.place(Move::new(0, 2 * i)).unwrap();
        }
        assert_eq!(b.check_win(Move::new(7, 6)), GameOutcome::Ongoing);
        assert_eq!(b.place(Move::new(7, 7)).unwrap(), GameOutcome::BlackWin);
    }

    #[test]
    fn overline_wins() {
        let mut b = Board::default();
        for c in [0, 1, 2, 4, 5] {
            b.place(Move::new(3, c)).unwrap();
            b.place(Move::new(10, 2 * c)).unwrap();
        }
        assert_eq!(b.place(Move::new(3, 3)).unwrap(), GameOutcome::BlackWin);
    }

    #[test]
    fn check_win_agrees_with_full_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10_000 {
            let plies = rng.gen_range(1..120);
            let b = random_game(&mut rng, plies);
            let last = b.last_move().unwrap();
            assert_eq!(b.check_win(last), b.outcome_full_scan(), "{b}");
        }
    }

    #[test]
    fn outcome_symmetry_under_color_swap() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..500 {
            let n = rng.gen_range(1..150);
            let b = random_game(&mut rng, n);
            let s = b.color_swapped();
            assert_eq!(s.outcome_full_scan(), b.outcome_full_scan().swapped());
            assert_eq!(s.side_to_move(), b.side_to_move().opponent());
        }
    }

    #[test]
    fn draw_on_full_board() {
        // (c + 2r) mod 4 < 2 colors no five-in-a-row on a 5x5 board.
        let color = |r: usize, c: usize| {
            if (c + 2 * r) % 4 < 2 {
                Cell::Black
            } else {
                Cell::White
            }
        };
        let b = Board::from_cells(5, 5, color, Color::White).unwrap();
        assert!(b.is_full());
        assert_eq!(b.outcome(), GameOutcome::Draw);
        assert_eq!(b.check_win(b.last_move().unwrap()), GameOutcome::Draw);
    }

    #[test]
    fn legal_move_counts() {
        let mut b = Board::default();
        assert_eq!(b.legal_moves().len(), 225);
        b.place(Move::new(7, 7)).unwrap();
        assert_eq!(b.legal_moves().len(), 224);
    }

    #[test]
    fn candidate_filter_matches_brute_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let n = rng.gen_range(1..30);
            let b = random_game(&mut rng, n);
            if b.outcome().is_over() {
                continue;
            }
            let stones: Vec<Move> = b.moves();
            let brute: Vec<Move> = b
                .legal_moves()
                .into_iter()
                .filter(|m| {
                    stones.iter().any(|s| {
                        (s.row() as isize - m.row() as isize).abs() <= 2
                            && (s.col() as isize - m.col() as isize).abs() <= 2
                    })
                })
                .collect();
            assert_eq!(b.candidate_moves(2), brute);
        }
    }

    #[test]
    fn position_text_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let b = random_game(&mut rng, 21);
        let text = b.to_position_text();
        let parsed = Board::parse_position(&text).unwrap();
        assert_eq!(parsed.cells(), b.cells());
        assert_eq!(parsed.side_to_move(), b.side_to_move());
        assert_eq!(parsed.hash(), b.hash());
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(Board::new(4, 15).is_err());
        assert!(Board::new(15, 33).is_err());
        assert!(Board::new(5, 32).is_ok());
    }
}
