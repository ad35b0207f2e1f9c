//! Self-play matches between two searchers.
//!
//! Every opening is played twice with colours swapped. A search error or
//! an illegal move loses the game for the engine that produced it.

use std::fmt::Write as _;

use serde::Serialize;

use crate::board::{Color, GameOutcome, Move};
use crate::book::{BookError, Opening};
use crate::search::{Limits, Searcher};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Five,
    BoardFull,
    MaxPlies,
    EngineCrash,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GameRecord {
    pub opening: String,
    pub black: String,
    pub white: String,
    pub board_size: usize,
    pub moves: Vec<Move>,
    pub winner: Option<Color>,
    pub termination: Termination,
    /// Set when an engine failed.
    pub error: Option<String>,
    /// Engine A had black.
    pub a_is_black: bool,
}

impl GameRecord {
    pub fn result_tag(&self) -> &'static str {
        match self.winner {
            Some(Color::Black) => "1-0",
            Some(Color::White) => "0-1",
            None => "1/2-1/2",
        }
    }

    /// Score of engine A in this game: 1, 0.5 or 0.
    pub fn a_score(&self) -> f64 {
        match self.winner {
            None => 0.5,
            Some(c) if (c == Color::Black) == self.a_is_black => 1.0,
            Some(_) => 0.0,
        }
    }

    /// PGN-like text: tag pairs, then numbered `row,col` moves.
    pub fn to_pgn(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "[Opening \"{}\"]", self.opening);
        let _ = writeln!(s, "[Black \"{}\"]", self.black);
        let _ = writeln!(s, "[White \"{}\"]", self.white);
        let _ = writeln!(s, "[Size \"{}\"]", self.board_size);
        let _ = writeln!(s, "[Result \"{}\"]", self.result_tag());
        let term = serde_json::to_value(self.termination).expect("plain enum");
        let _ = writeln!(s, "[Termination \"{}\"]", term.as_str().unwrap_or("?"));
        if let Some(e) = &self.error {
            let _ = writeln!(s, "[Error \"{}\"]", e.replace('"', "'"));
        }
        s.push('\n');
        let mut line = String::new();
        for (i, pair) in self.moves.chunks(2).enumerate() {
            let _ = write!(line, "{}. {}", i + 1, pair[0]);
            if let Some(m) = pair.get(1) {
                let _ = write!(line, " {m}");
            }
            line.push(' ');
        }
        s.push_str(&line);
        s.push_str(self.result_tag());
        s.push('\n');
        s
    }
}

/// Elo difference implied by score fraction `s`.
pub fn elo_from_score(s: f64) -> f64 {
    -400.0 * (1.0 / s - 1.0).log10()
}

/// Wilson score interval for `successes` out of `n` at normal quantile `z`.
pub fn wilson_interval(successes: f64, n: f64, z: f64) -> (f64, f64) {
    if n <= 0.0 {
        return (0.0, 1.0);
    }
    let p = successes / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MatchReport {
    pub engine_a: String,
    pub engine_b: String,
    pub games: usize,
    pub wins: usize,
    pub losses: usize,
    pub draws: usize,
    pub crashes_a: usize,
    pub crashes_b: usize,
    /// Score fraction of engine A.
    pub score: f64,
    /// Elo of A over B. Scores of 0 or 1 are pulled half a game inward.
    pub elo: f64,
    /// 95% Wilson interval mapped to Elo.
    pub elo_low: f64,
    pub elo_high: f64,
}

impl MatchReport {
    pub fn from_records(engine_a: String, engine_b: String, records: &[GameRecord]) -> MatchReport {
        let games = records.len();
        let wins = records.iter().filter(|r| r.a_score() == 1.0).count();
        let losses = records.iter().filter(|r| r.a_score() == 0.0).count();
        let crashed = |a: bool| {
            records
                .iter()
                .filter(|r| {
                    r.termination == Termination::EngineCrash && (r.a_score() == 0.0) == a
                })
                .count()
        };
        let points = wins as f64 + 0.5 * (games - wins - losses) as f64;
        let n = games as f64;
        let score = if games == 0 { 0.5 } else { points / n };
        let edge = if games == 0 { 0.0 } else { 0.5 / n };
        let to_elo = |s: f64| elo_from_score(s.clamp(edge, 1.0 - edge).clamp(1e-9, 1.0 - 1e-9));
        let (lo, hi) = wilson_interval(points, n, 1.96);
        MatchReport {
            engine_a,
            engine_b,
            games,
            wins,
            losses,
            draws: games - wins - losses,
            crashes_a: crashed(true),
            crashes_b: crashed(false),
            score,
            elo: to_elo(score),
            elo_low: to_elo(lo),
            elo_high: to_elo(hi),
        }
    }
}

#[derive(Clone, Debug)]
pub struct MatchSettings {
    pub board_size: usize,
    pub limits: Limits,
    /// Games still running after this many plies are drawn.
    pub max_plies: usize,
}

/// Plays one game from `opening` to the end or to `max_plies`.
pub fn play_game(
    black: &mut dyn Searcher,
    white: &mut dyn Searcher,
    opening: &Opening,
    settings: &MatchSettings,
    a_is_black: bool,
) -> Result<GameRecord, BookError> {
    let mut board = opening.board(settings.board_size)?;
    black.clear();
    white.clear();
    let mut record = GameRecord {
        opening: opening.name.clone(),
        black: black.name(),
        white: white.name(),
        board_size: settings.board_size,
        moves: board.moves(),
        winner: None,
        termination: Termination::MaxPlies,
        error: None,
        a_is_black,
    };
    loop {
        match board.outcome() {
            GameOutcome::Ongoing => {}
            GameOutcome::Draw => {
                record.termination = Termination::BoardFull;
                break;
            }
            o => {
                record.winner = o.winner();
                record.termination = Termination::Five;
                break;
            }
        }
        if board.ply() >= settings.max_plies {
            break;
        }
        let mover = board.side_to_move();
        let engine: &mut dyn Searcher = if mover == Color::Black { &mut *black } else { &mut *white };
        match engine.search(&board, &settings.limits, None) {
            Ok(r) => {
                if let Err(e) = board.place(r.best_move) {
                    crash(&mut record, mover, format!("illegal move {}: {e}", r.best_move));
                    break;
                }
                record.moves.push(r.best_move);
            }
            Err(e) => {
                crash(&mut record, mover, e.to_string());
                break;
            }
        }
    }
    Ok(record)
}

fn crash(record: &mut GameRecord, mover: Color, msg: String) {
    record.winner = Some(mover.opponent());
    record.termination = Termination::EngineCrash;
    record.error = Some(format!("{} engine: {msg}", mover.name()));
}

/// Plays every opening twice, swapping colours, and reports from A's side.
pub fn selfplay_match(
    a: &mut dyn Searcher,
    b: &mut dyn Searcher,
    openings: &[Opening],
    settings: &MatchSettings,
    mut on_game: impl FnMut(&GameRecord),
) -> Result<(MatchReport, Vec<GameRecord>), BookError> {
    let mut records = Vec::with_capacity(openings.len() * 2);
    for opening in openings {
        for a_is_black in [true, false] {
            let rec = if a_is_black {
                play_game(a, b, opening, settings, true)?
            } else {
                play_game(b, a, opening, settings, false)?
            };
            on_game(&rec);
            records.push(rec);
        }
    }
    Ok((MatchReport::from_records(a.name(), b.name(), &records), records))
}
