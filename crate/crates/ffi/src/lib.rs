//! C ABI for the engine.
//!
//! Every function returns a [`MixStatus`]. On failure the message is kept
//! per thread and read with [`mix_last_error_message`]. Handles come from
//! [`mix_engine_new`] and must be released with [`mix_engine_free`].
//! Panics never cross the boundary; they become [`MixStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use mixnet::board::{Board, BoardError, Color, Move};
use mixnet::config::EngineConfig;
use mixnet::search::{Limits, Searcher};

/// Result of every call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MixStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    IllegalMove = 3,
    GameOver = 4,
    ConfigError = 5,
    SearchError = 6,
    Panic = 7,
}

/// Side to move.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MixColor {
    Black = 0,
    White = 1,
}

/// Outcome of [`mix_engine_search`].
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MixSearchResult {
    pub row: u32,
    pub col: u32,
    /// Win, loss and draw probability for the side to move.
    pub win: f64,
    pub loss: f64,
    pub draw: f64,
    /// Alpha-beta score; meaningful when `has_score` is 1.
    pub score: i32,
    pub has_score: u8,
    pub nodes: u64,
    pub depth: u32,
}

/// Opaque engine handle.
pub struct MixEngine {
    config: EngineConfig,
    board: Board,
    searcher: Box<dyn Searcher>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).expect("nul bytes removed"));
}

fn fail(status: MixStatus, msg: impl Into<String>) -> MixStatus {
    set_error(msg);
    status
}

/// Runs `f`, clearing the error first and turning panics into a status.
fn guard(f: impl FnOnce() -> MixStatus) -> MixStatus {
    set_error("");
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(MixStatus::Panic, format!("internal error: {msg}"))
        }
    }
}

fn board_status(e: &BoardError) -> MixStatus {
    match e {
        BoardError::GameOver => MixStatus::GameOver,
        BoardError::BadSize(..) | BoardError::Parse(_) => MixStatus::InvalidArgument,
        _ => MixStatus::IllegalMove,
    }
}

unsafe fn engine<'a>(handle: *mut MixEngine) -> Result<&'a mut MixEngine, MixStatus> {
    handle
        .as_mut()
        .ok_or_else(|| fail(MixStatus::NullPointer, "engine handle is null"))
}

/// Message of the last failed call on this thread; empty after a
/// success. Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn mix_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version, a static string.
#[no_mangle]
pub extern "C" fn mix_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates an engine from a TOML config (null for defaults) and stores the
/// handle in `*out`.
///
/// # Safety
/// `config_toml` is null or a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn mix_engine_new(config_toml: *const c_char, out: *mut *mut MixEngine) -> MixStatus {
    guard(|| {
        if out.is_null() {
            return fail(MixStatus::NullPointer, "out is null");
        }
        *out = ptr::null_mut();
        let config = if config_toml.is_null() {
            EngineConfig::default()
        } else {
            let text = match CStr::from_ptr(config_toml).to_str() {
                Ok(t) => t,
                Err(_) => return fail(MixStatus::InvalidArgument, "config is not UTF-8"),
            };
            match EngineConfig::from_toml(text) {
                Ok(c) => c,
                Err(e) => return fail(MixStatus::ConfigError, e.to_string()),
            }
        };
        let searcher = match config.build_searcher(None) {
            Ok(s) => s,
            Err(e) => return fail(MixStatus::ConfigError, e.to_string()),
        };
        let board = config.new_board();
        *out = Box::into_raw(Box::new(MixEngine {
            config,
            board,
            searcher,
        }));
        MixStatus::Ok
    })
}

/// Releases an engine. Null is ignored.
///
/// # Safety
/// `handle` came from [`mix_engine_new`] and is not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mix_engine_free(handle: *mut MixEngine) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Clears the board and sets its size.
///
/// # Safety
/// `handle` is a live engine.
#[no_mangle]
pub unsafe extern "C" fn mix_engine_new_game(handle: *mut MixEngine, size: u32) -> MixStatus {
    guard(|| {
        let e = match engine(handle) {
            Ok(e) => e,
            Err(s) => return s,
        };
        match Board::new(size as usize, size as usize) {
            Ok(b) => {
                e.board = b;
                e.config.board_size = size as usize;
                e.searcher.clear();
                MixStatus::Ok
            }
            Err(err) => fail(board_status(&err), err.to_string()),
        }
    })
}

/// Plays a move for the side to move.
///
/// # Safety
/// `handle` is a live engine.
#[no_mangle]
pub unsafe extern "C" fn mix_engine_play(handle: *mut MixEngine, row: u32, col: u32) -> MixStatus {
    guard(|| {
        let e = match engine(handle) {
            Ok(e) => e,
            Err(s) => return s,
        };
        if row as usize >= e.board.height() || col as usize >= e.board.width() {
            return fail(MixStatus::IllegalMove, format!("({row}, {col}) is off the board"));
        }
        match e.board.place(Move::new(row as usize, col as usize)) {
            Ok(_) => MixStatus::Ok,
            Err(err) => fail(board_status(&err), err.to_string()),
        }
    })
}

/// Takes back the last move.
///
/// # Safety
/// `handle` is a live engine.
#[no_mangle]
pub unsafe extern "C" fn mix_engine_undo(handle: *mut MixEngine) -> MixStatus {
    guard(|| {
        let e = match engine(handle) {
            Ok(e) => e,
            Err(s) => return s,
        };
        match e.board.undo() {
            Ok(_) => MixStatus::Ok,
            Err(err) => fail(MixStatus::InvalidArgument, err.to_string()),
        }
    })
}

/// Writes the side to move.
///
/// # Safety
/// `handle` is a live engine and `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn mix_engine_side_to_move(handle: *mut MixEngine, out: *mut MixColor) -> MixStatus {
    guard(|| {
        let e = match engine(handle) {
            Ok(e) => e,
            Err(s) => return s,
        };
        if out.is_null() {
            return fail(MixStatus::NullPointer, "out is null");
        }
        *out = match e.board.side_to_move() {
            Color::Black => MixColor::Black,
            Color::White => MixColor::White,
        };
        MixStatus::Ok
    })
}

/// Searches the current position without playing the move. `budget` is
/// the playout or node count; 0 uses the configured per-move time.
///
/// # Safety
/// `handle` is a live engine and `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn mix_engine_search(handle: *mut MixEngine, budget: u64, out: *mut MixSearchResult) -> MixStatus {
    guard(|| {
        let e = match engine(handle) {
            Ok(e) => e,
            Err(s) => return s,
        };
        if out.is_null() {
            return fail(MixStatus::NullPointer, "out is null");
        }
        if e.board.outcome().is_over() {
            return fail(MixStatus::GameOver, "the game is over");
        }
        let limits = if budget == 0 {
            Limits::default().with_time(e.config.time.move_budget(None, 0))
        } else {
            Limits {
                playouts: Some(budget),
                nodes: Some(budget),
                ..Limits::default()
            }
        };
        match e.searcher.search(&e.board, &limits, None) {
            Ok(r) => {
                *out = MixSearchResult {
                    row: r.best_move.row() as u32,
                    col: r.best_move.col() as u32,
                    win: r.value[0],
                    loss: r.value[1],
                    draw: r.value[2],
                    score: r.score.unwrap_or(0),
                    has_score: r.score.is_some() as u8,
                    nodes: r.nodes,
                    depth: r.depth,
                };
                MixStatus::Ok
            }
            Err(err) => fail(MixStatus::SearchError, err.to_string()),
        }
    })
}

/// Static evaluation of the current position: the policy over all cells
/// in row-major order (`len` must be at least size * size) and the
/// win/loss/draw triple.
///
/// # Safety
/// `handle` is a live engine, `policy` holds `len` floats and `value`
/// holds three doubles.
#[no_mangle]
pub unsafe extern "C" fn mix_engine_evaluate(
    handle: *mut MixEngine,
    policy: *mut f32,
    len: usize,
    value: *mut f64,
) -> MixStatus {
    guard(|| {
        let e = match engine(handle) {
            Ok(e) => e,
            Err(s) => return s,
        };
        if policy.is_null() || value.is_null() {
            return fail(MixStatus::NullPointer, "output buffer is null");
        }
        let area = e.board.area();
        if len < area {
            return fail(MixStatus::InvalidArgument, format!("policy buffer holds {len}, need {area}"));
        }
        let eval = e.searcher.evaluator_mut();
        eval.reset(&e.board);
        let ev = eval.evaluate(&e.board);
        let out = std::slice::from_raw_parts_mut(policy, area);
        for (o, p) in out.iter_mut().zip(&ev.policy) {
            *o = *p as f32;
        }
        std::slice::from_raw_parts_mut(value, 3).copy_from_slice(&ev.value);
        MixStatus::Ok
    })
}
