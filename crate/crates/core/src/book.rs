//! Opening book for matches.
//!
//! Openings are stored for a 15x15 board and shifted so that the first
//! stone lands on the centre of the board being played.

use thiserror::Error;

use crate::board::{Board, BoardError, Move};

const OPENINGS: &str = include_str!("../data/openings.txt");
const BOOK_CENTRE: isize = 7;

#[derive(Debug, Error)]
pub enum BookError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("opening {name} does not fit a {size}x{size} board")]
    DoesNotFit { name: String, size: usize },
    #[error("opening {name}: {source}")]
    Illegal {
        name: String,
        #[source]
        source: BoardError,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Opening {
    pub name: String,
    pub balanced: bool,
    /// Moves on the 15x15 reference board.
    pub moves: Vec<Move>,
}

impl Opening {
    /// Moves shifted to a `size` x `size` board.
    pub fn moves_on(&self, size: usize) -> Result<Vec<Move>, BookError> {
        let shift = (size / 2) as isize - BOOK_CENTRE;
        self.moves
            .iter()
            .map(|m| {
                let r = m.row() as isize + shift;
                let c = m.col() as isize + shift;
                if r < 0 || c < 0 || r >= size as isize || c >= size as isize {
                    Err(BookError::DoesNotFit {
                        name: self.name.clone(),
                        size,
                    })
                } else {
                    Ok(Move::new(r as usize, c as usize))
                }
            })
            .collect()
    }

    /// The position after the opening on a `size` x `size` board.
    pub fn board(&self, size: usize) -> Result<Board, BookError> {
        let moves = self.moves_on(size)?;
        Board::from_moves(size, size, &moves).map_err(|source| BookError::Illegal {
            name: self.name.clone(),
            source,
        })
    }
}

/// Parses the book format: `name flag row,col ...`, `#` starts a comment.
pub fn parse_book(text: &str) -> Result<Vec<Opening>, BookError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| BookError::Parse { line: i + 1, msg };
        let mut parts = line.split_whitespace();
        let name = parts.next().expect("line is not empty").to_string();
        let balanced = match parts.next() {
            Some("balanced") => true,
            Some("unbalanced") => false,
            other => return Err(err(format!("bad flag {other:?}"))),
        };
        let moves = parts
            .map(|p| p.parse::<Move>().map_err(|e| err(e.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        if moves.is_empty() {
            return Err(err("opening has no moves".into()));
        }
        out.push(Opening {
            name,
            balanced,
            moves,
        });
    }
    Ok(out)
}

/// Every opening in the bundled book.
pub fn all_openings() -> Vec<Opening> {
    parse_book(OPENINGS).expect("bundled book parses")
}

/// The bundled openings flagged balanced, in file order.
pub fn balanced_openings() -> Vec<Opening> {
    all_openings().into_iter().filter(|o| o.balanced).collect()
}
