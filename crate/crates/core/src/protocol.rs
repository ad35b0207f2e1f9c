//! Gomocup text protocol.
//!
//! Coordinates on the wire are `x,y` = column,row; the board uses
//! `(row, col)`, so every boundary crossing swaps them.
//!
//! Supported commands: `START n`, `RECTSTART w,h`, `RESTART`, `BEGIN`,
//! `TURN x,y`, `TAKEBACK x,y`, `BOARD` ... `DONE`, `INFO key value`,
//! `ABOUT` and `END`. Anything else is answered with `ERROR <message>`.

use std::io::{self, BufRead, Write};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{mpsc, Arc};
use std::time::Duration;

use crate::board::{Board, BoardError, Cell, Color, Move, MAX_SIZE, MIN_SIZE};
use crate::config::EngineConfig;
use crate::search::{Limits, SearchInfo, Searcher};

pub const ABOUT: &str = "name=\"mixnet\", version=\"0.1.0\", author=\"mixnet developers\", country=\"unknown\"";

/// What the caller should do after a command.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Control {
    Continue,
    Quit,
}

/// Protocol state machine. Searches run inline in [`Protocol::handle`];
/// [`run`] adds a reader thread so `END` can interrupt them.
pub struct Protocol {
    config: EngineConfig,
    searcher: Box<dyn Searcher>,
    board: Option<Board>,
    /// `BOARD` lines collected so far: `(move, who)`.
    pending: Option<Vec<(Move, u8)>>,
    timeout_turn: Option<u64>,
    timeout_match: Option<u64>,
    time_left: Option<u64>,
    /// Fixed search depth overriding the clock, for reproducible runs.
    fixed_depth: Option<u32>,
    stop: Arc<AtomicBool>,
    /// Emit `MESSAGE` lines with search progress.
    pub emit_info: bool,
}

impl Protocol {
    pub fn new(config: EngineConfig, searcher: Box<dyn Searcher>) -> Protocol {
        Protocol {
            config,
            searcher,
            board: None,
            pending: None,
            timeout_turn: None,
            timeout_match: None,
            time_left: None,
            fixed_depth: None,
            stop: Arc::new(AtomicBool::new(false)),
            emit_info: false,
        }
    }

    /// Searches to exactly `depth` plies (alpha-beta) or `depth` playouts
    /// (MCTS), ignoring the clock.
    pub fn with_fixed_depth(mut self, depth: u32) -> Protocol {
        self.fixed_depth = Some(depth);
        self
    }

    pub fn stop_handle(&self) -> Arc<AtomicBool> {
        self.stop.clone()
    }

    pub fn board(&self) -> Option<&Board> {
        self.board.as_ref()
    }

    /// Handles one input line, returning the response lines.
    pub fn handle(&mut self, line: &str) -> (Vec<String>, Control) {
        let line = line.trim();
        if line.is_empty() {
            return (Vec::new(), Control::Continue);
        }
        if let Some(pending) = self.pending.as_mut() {
            if line.eq_ignore_ascii_case("DONE") {
                let stones = self.pending.take().expect("collecting");
                return (self.load_board(&stones), Control::Continue);
            }
            return match parse_triple(line) {
                Some(t) => {
                    pending.push(t);
                    (Vec::new(), Control::Continue)
                }
                None => {
                    self.pending = None;
                    (vec![format!("ERROR bad BOARD line `{line}`")], Control::Continue)
                }
            };
        }
        let (cmd, rest) = match line.split_once(char::is_whitespace) {
            Some((c, r)) => (c, r.trim()),
            None => (line, ""),
        };
        let out = match cmd.to_ascii_uppercase().as_str() {
            "START" => self.start(rest),
            "RECTSTART" => self.rectstart(rest),
            "RESTART" => match self.board.as_ref() {
                Some(b) => {
                    self.board = Some(Board::new(b.height(), b.width()).expect("size was valid"));
                    self.searcher.clear();
                    vec!["OK".into()]
                }
                None => vec!["ERROR no game started".into()],
            },
            "BEGIN" => match self.board.as_ref() {
                Some(b) if b.ply() == 0 => self.think(),
                Some(_) => vec!["ERROR BEGIN after moves were played".into()],
                None => vec!["ERROR no game started".into()],
            },
            "TURN" => self.turn(rest),
            "TAKEBACK" => self.takeback(rest),
            "BOARD" => {
                if self.board.is_none() {
                    vec!["ERROR no game started".into()]
                } else {
                    self.pending = Some(Vec::new());
                    Vec::new()
                }
            }
            "INFO" => self.info(rest),
            "ABOUT" => vec![ABOUT.into()],
            "END" => return (Vec::new(), Control::Quit),
            _ => vec![format!("ERROR unknown command `{cmd}`")],
        };
        (out, Control::Continue)
    }

    fn start(&mut self, rest: &str) -> Vec<String> {
        match rest.parse::<usize>() {
            Ok(n) if (MIN_SIZE..=MAX_SIZE).contains(&n) => self.new_game(n, n),
            _ => vec![format!("ERROR unsupported size `{rest}`")],
        }
    }

    fn rectstart(&mut self, rest: &str) -> Vec<String> {
        let dims = rest
            .split_once(',')
            .and_then(|(w, h)| Some((w.trim().parse::<usize>().ok()?, h.trim().parse::<usize>().ok()?)));
        match dims {
            Some((w, h)) if (MIN_SIZE..=MAX_SIZE).contains(&w) && (MIN_SIZE..=MAX_SIZE).contains(&h) => {
                self.new_game(h, w)
            }
            _ => vec![format!("ERROR unsupported size `{rest}`")],
        }
    }

    fn new_game(&mut self, height: usize, width: usize) -> Vec<String> {
        self.board = Some(Board::new(height, width).expect("size checked"));
        self.pending = None;
        self.searcher.clear();
        vec!["OK".into()]
    }

    fn turn(&mut self, rest: &str) -> Vec<String> {
        let Some(board) = self.board.as_mut() else {
            return vec!["ERROR no game started".into()];
        };
        let Some(mv) = parse_xy(rest) else {
            return vec![format!("ERROR bad coordinate `{rest}`")];
        };
        match board.place(mv) {
            Ok(_) => self.think(),
            // Report in wire coordinates rather than the board's (row, col).
            Err(BoardError::OccupiedCell(_)) => vec![format!("ERROR cell {},{} is occupied", mv.col(), mv.row())],
            Err(BoardError::OutOfBounds(_)) => vec![format!("ERROR cell {},{} is off the board", mv.col(), mv.row())],
            Err(e) => vec![format!("ERROR {e}")],
        }
    }

    fn takeback(&mut self, rest: &str) -> Vec<String> {
        let Some(board) = self.board.as_mut() else {
            return vec!["ERROR no game started".into()];
        };
        match parse_xy(rest) {
            Some(mv) if board.last_move() == Some(mv) => {
                board.undo().expect("history is not empty");
                vec!["OK".into()]
            }
            _ => vec![format!("ERROR cannot take back `{rest}`")],
        }
    }

    fn info(&mut self, rest: &str) -> Vec<String> {
        let (key, value) = match rest.split_once(char::is_whitespace) {
            Some((k, v)) => (k.to_ascii_lowercase(), v.trim()),
            None => return vec![format!("ERROR bad INFO `{rest}`")],
        };
        let number = value.parse::<i64>().ok().map(|v| v.max(0) as u64);
        match key.as_str() {
            "timeout_turn" => self.timeout_turn = number,
            "timeout_match" => self.timeout_match = number,
            "time_left" => self.time_left = number,
            // max_memory, rule and the rest are accepted and ignored.
            _ => {}
        }
        Vec::new()
    }

    fn load_board(&mut self, stones: &[(Move, u8)]) -> Vec<String> {
        let Some(board) = self.board.as_ref() else {
            return vec!["ERROR no game started".into()];
        };
        let (h, w) = (board.height(), board.width());
        let own = stones.iter().filter(|s| s.1 == 1).count();
        let their = stones.len() - own;
        // We are to move, so equal counts mean we play black.
        let me = if own == their { Color::Black } else { Color::White };
        let mut grid = vec![Cell::Empty; h * w];
        for &(mv, who) in stones {
            if mv.row() >= h || mv.col() >= w || grid[mv.row() * w + mv.col()] != Cell::Empty {
                return vec![format!("ERROR bad stone {},{}", mv.col(), mv.row())];
            }
            let color = if who == 1 { me } else { me.opponent() };
            grid[mv.row() * w + mv.col()] = color.cell();
        }
        match Board::from_cells(h, w, |r, c| grid[r * w + c], me) {
            Ok(b) if !b.outcome().is_over() => {
                self.board = Some(b);
                self.think()
            }
            Ok(_) => vec!["ERROR position is already decided".into()],
            Err(e) => vec![format!("ERROR {e}")],
        }
    }

    fn limits(&self, board: &Board) -> Limits {
        let mut limits = Limits::default().with_stop(self.stop.clone());
        if let Some(d) = self.fixed_depth {
            limits.depth = Some(d);
            limits.playouts = Some(d as u64);
            return limits;
        }
        let mut tc = self.config.time.clone();
        if let Some(t) = self.timeout_turn {
            // Zero asks for the fastest possible reply, not an unlimited one.
            tc.turn_ms = t.max(1);
        }
        let time_left = match (self.time_left, self.timeout_match) {
            (Some(l), _) => Some(l),
            (None, Some(m)) if m > 0 => Some(m),
            _ => None,
        };
        let empty = board.area() - board.ply();
        limits.time = Some(tc.move_budget(time_left, empty));
        limits
    }

    /// Searches for and plays the engine's move.
    fn think(&mut self) -> Vec<String> {
        let board = self.board.as_ref().expect("caller checked").clone();
        if board.outcome().is_over() {
            return vec!["ERROR game is over".into()];
        }
        // Only END raises the flag, so it is never cleared.
        let limits = self.limits(&board);
        let mut messages = Vec::new();
        let emit = self.emit_info;
        let mut sink = |i: &SearchInfo| {
            if emit {
                messages.push(format!("MESSAGE {}", i.line()));
            }
        };
        let result = self.searcher.search(&board, &limits, Some(&mut sink));
        let mv = match result {
            Ok(r) => r.best_move,
            Err(e) => return vec![format!("ERROR {e}")],
        };
        let board = self.board.as_mut().expect("caller checked");
        // Guard the wire against any search defect.
        let mv = if board.contains(mv) && board.at(mv) == Cell::Empty {
            mv
        } else {
            log::warn!("search returned unusable move {mv}");
            board.legal_moves()[0]
        };
        board.place(mv).expect("move is legal");
        messages.push(format!("{},{}", mv.col(), mv.row()));
        messages
    }
}

/// Parses `x,y` into a board move.
pub fn parse_xy(text: &str) -> Option<Move> {
    let (x, y) = text.split_once(',')?;
    let x: usize = x.trim().parse().ok()?;
    let y: usize = y.trim().parse().ok()?;
    (x < MAX_SIZE && y < MAX_SIZE).then(|| Move::new(y, x))
}

fn parse_triple(text: &str) -> Option<(Move, u8)> {
    let mut parts = text.split(',').map(str::trim);
    let x: usize = parts.next()?.parse().ok()?;
    let y: usize = parts.next()?.parse().ok()?;
    let who: u8 = parts.next()?.parse().ok()?;
    if parts.next().is_some() || !(1..=3).contains(&who) || x >= MAX_SIZE || y >= MAX_SIZE {
        return None;
    }
    Some((Move::new(y, x), if who == 1 { 1 } else { 2 }))
}

/// Runs the protocol over `input`/`output`. A reader thread watches for
/// `END` and raises the stop flag so a running search returns at once.
pub fn run<R, W>(mut protocol: Protocol, input: R, mut output: W) -> io::Result<()>
where
    R: BufRead + Send + 'static,
    W: Write,
{
    let (tx, rx) = mpsc::channel::<String>();
    let stop = protocol.stop_handle();
    std::thread::spawn(move || {
        for line in input.lines() {
            let Ok(line) = line else { break };
            if line.trim().eq_ignore_ascii_case("END") {
                stop.store(true, Ordering::Relaxed);
            }
            if tx.send(line).is_err() {
                break;
            }
        }
    });
    loop {
        let line = match rx.recv_timeout(Duration::from_secs(3600)) {
            Ok(l) => l,
            Err(mpsc::RecvTimeoutError::Timeout) => continue,
            Err(mpsc::RecvTimeoutError::Disconnected) => break,
        };
        let (lines, control) = protocol.handle(&line);
        for l in lines {
            writeln!(output, "{l}")?;
        }
        output.flush()?;
        if control == Control::Quit {
            break;
        }
    }
    Ok(())
}
