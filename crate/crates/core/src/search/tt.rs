//! Transposition table: power-of-two bucket count, four entries per
//! bucket, replacement by depth then age.

use crate::board::Move;

/// Scores at or beyond this magnitude encode a forced win or loss.
pub const MATE: i32 = 30_000;
/// Longest search path accounted for in mate scores.
pub const MAX_PLY: i32 = 256;

pub fn is_mate_score(score: i32) -> bool {
    score.abs() >= MATE - MAX_PLY
}

/// Converts a root-relative mate score into a node-relative one.
pub fn score_to_tt(score: i32, ply: usize) -> i32 {
    if score >= MATE - MAX_PLY {
        score + ply as i32
    } else if score <= -(MATE - MAX_PLY) {
        score - ply as i32
    } else {
        score
    }
}

pub fn score_from_tt(score: i32, ply: usize) -> i32 {
    if score >= MATE - MAX_PLY {
        score - ply as i32
    } else if score <= -(MATE - MAX_PLY) {
        score + ply as i32
    } else {
        score
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Bound {
    Exact,
    Lower,
    Upper,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TtEntry {
    pub key: u64,
    pub depth: i32,
    pub bound: Bound,
    /// Node-relative score, see [`score_to_tt`].
    pub score: i32,
    pub best_move: Option<Move>,
    pub generation: u8,
}

const WAYS: usize = 4;

#[derive(Clone, Debug)]
pub struct TranspositionTable {
    buckets: Vec<[Option<TtEntry>; WAYS]>,
    generation: u8,
}

impl TranspositionTable {
    /// Table of at most `megabytes` MiB (at least one bucket).
    pub fn new(megabytes: usize) -> TranspositionTable {
        let bucket_bytes = std::mem::size_of::<[Option<TtEntry>; WAYS]>();
        let wanted = (megabytes << 20) / bucket_bytes;
        let count = if wanted <= 1 { 1 } else { 1usize << (usize::BITS - 1 - wanted.leading_zeros()) };
        TranspositionTable {
            buckets: vec![[None; WAYS]; count],
            generation: 0,
        }
    }

    pub fn buckets(&self) -> usize {
        self.buckets.len()
    }

    pub fn clear(&mut self) {
        self.buckets.iter_mut().for_each(|b| *b = [None; WAYS]);
        self.generation = 0;
    }

    /// Starts a new search; older entries become preferred victims.
    pub fn new_search(&mut self) {
        self.generation = self.generation.wrapping_add(1);
    }

    fn bucket(&self, key: u64) -> usize {
        (key as usize) & (self.buckets.len() - 1)
    }

    /// Entry with exactly this key.
    pub fn probe(&self, key: u64) -> Option<TtEntry> {
        self.buckets[self.bucket(key)]
            .iter()
            .flatten()
            .find(|e| e.key == key)
            .copied()
    }

    pub fn store(&mut self, key: u64, depth: i32, bound: Bound, score: i32, best_move: Option<Move>) {
        let generation = self.generation;
        let b = self.bucket(key);
        let bucket = &mut self.buckets[b];
        let entry = TtEntry {
            key,
            depth,
            bound,
            score,
            best_move,
            generation,
        };
        if let Some(slot) = bucket.iter_mut().find(|e| e.is_some_and(|e| e.key == key)) {
            let old = slot.expect("matched above");
            // Keep a deeper result from this search unless the new one is exact.
            if old.generation == generation && old.depth > depth && bound != Bound::Exact {
                if old.best_move.is_none() {
                    slot.as_mut().expect("matched above").best_move = best_move;
                }
                return;
            }
            *slot = Some(entry);
            return;
        }
        if let Some(slot) = bucket.iter_mut().find(|e| e.is_none()) {
            *slot = Some(entry);
            return;
        }
        // Victim: stale entries first, then the shallowest.
        let victim = (0..WAYS)
            .min_by_key(|&i| {
                let e = bucket[i].expect("bucket is full");
                let age = generation.wrapping_sub(e.generation) as i32;
                e.depth - 4 * age
            })
            .expect("bucket has entries");
        bucket[victim] = Some(entry);
    }
}
