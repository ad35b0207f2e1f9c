//! Incrementally updated feature maps.
//!
//! For both perspectives the accumulator keeps, per cell:
//!
//! * the codebook feature of each of the four line patterns through it,
//! * their sum (`dir_sum`, int16, scale 32, bounded by 4 x 512),
//! * the processed map `F'` (int32, scale 2048): the first `C/2` channels
//!   are the depth-wise 3x3 convolution of `F = ReLU(dir_sum)` with an
//!   int16 kernel at scale 64, the rest are `F` multiplied by 64.
//!
//! A stone change touches at most 4 x 11 line patterns per perspective.
//! Only those are looked up again; the change of `F` at each touched cell
//! is pushed through the kernel footprint into `F'`. Every update is
//! journaled so undo restores the previous state exactly.

use std::sync::Arc;

use thiserror::Error;

use crate::board::{Board, Color, Move};
use crate::codebook::Codebook;
use crate::heads::{FeatureMap, FeatureView};
use crate::pattern::{affected_cells, pattern_index_at, Direction};

/// Fixed-point scale of the depth-wise kernel.
pub const KERNEL_SCALE: i32 = 64;
/// Kernel weights are clamped to `[-KERNEL_CLAMP, KERNEL_CLAMP]`.
pub const KERNEL_CLAMP: f32 = 2.0;
/// Bound on `|dir_sum|`: four clamped codebook features.
pub const DIR_SUM_BOUND: i32 = 4 * 512;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AccumulatorError {
    #[error("configuration mismatch: {0}")]
    ConfigMismatch(String),
    #[error("journal is empty")]
    EmptyJournal,
    #[error("move {0} is not the last move on the board")]
    NotLastMove(Move),
}

/// Quantizes a float depth-wise kernel `[C/2][3][3]`.
pub fn quantize_kernel(kernel: &[f32]) -> Vec<i16> {
    kernel
        .iter()
        .map(|w| (w.clamp(-KERNEL_CLAMP, KERNEL_CLAMP) * KERNEL_SCALE as f32).round() as i16)
        .collect()
}

/// One journaled line-feature replacement.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Change {
    pub perspective: Color,
    pub cell: u16,
    pub dir: Direction,
    pub old_id: u32,
    pub new_id: u32,
}

/// Journal record of one stone placement.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DeltaRecord {
    pub mv: Move,
    pub color: Color,
    pub changes: Vec<Change>,
    /// Old then new feature of each change, `2 * C` values per change.
    features: Vec<i16>,
}

impl DeltaRecord {
    pub fn old_feature(&self, i: usize, c: usize) -> &[i16] {
        &self.features[2 * i * c..(2 * i + 1) * c]
    }

    pub fn new_feature(&self, i: usize, c: usize) -> &[i16] {
        &self.features[(2 * i + 1) * c..(2 * i + 2) * c]
    }
}

/// Work counters, cumulative since construction or the last reset.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Counters {
    /// Codebook rows fetched for new line patterns.
    pub lookups: u64,
    /// Cells whose `F` changed and were pushed into `F'`.
    pub cell_updates: u64,
}

#[derive(Clone)]
pub struct FeatureAccumulator {
    codebook: Arc<Codebook>,
    height: usize,
    width: usize,
    channels: usize,
    kernel: Vec<i16>,
    /// `[persp][cell][dir]`.
    ids: Vec<u32>,
    /// `[persp][cell][dir][C]`.
    line_features: Vec<i16>,
    /// `[persp][cell][C]`.
    dir_sum: Vec<i16>,
    /// `[persp][cell][C]`.
    fprime: Vec<i32>,
    journal: Vec<DeltaRecord>,
    counters: Counters,
}

impl std::fmt::Debug for FeatureAccumulator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FeatureAccumulator")
            .field("height", &self.height)
            .field("width", &self.width)
            .field("channels", &self.channels)
            .field("journal_depth", &self.journal.len())
            .finish_non_exhaustive()
    }
}

impl FeatureAccumulator {
    /// Builds the accumulator for `board` from scratch with a quantized
    /// kernel of `C/2 x 9` entries.
    pub fn new(
        codebook: Arc<Codebook>,
        kernel: Vec<i16>,
        board: &Board,
    ) -> Result<FeatureAccumulator, AccumulatorError> {
        let channels = codebook.channels();
        if kernel.len() != channels / 2 * 9 {
            return Err(AccumulatorError::ConfigMismatch(format!(
                "kernel has {} entries, expected {}",
                kernel.len(),
                channels / 2 * 9
            )));
        }
        let area = board.area();
        let mut acc = FeatureAccumulator {
            codebook,
            height: board.height(),
            width: board.width(),
            channels,
            kernel,
            ids: vec![0; 2 * area * 4],
            line_features: vec![0; 2 * area * 4 * channels],
            dir_sum: vec![0; 2 * area * channels],
            fprime: vec![0; 2 * area * channels],
            journal: Vec::new(),
            counters: Counters::default(),
        };
        acc.refresh(board);
        Ok(acc)
    }

    /// Recomputes everything from `board` and clears the journal.
    pub fn refresh(&mut self, board: &Board) {
        assert_eq!((board.height(), board.width()), (self.height, self.width));
        let c = self.channels;
        let area = self.height * self.width;
        for persp in [Color::Black, Color::White] {
            for cell in 0..area {
                let (r, col) = (cell / self.width, cell % self.width);
                let sum_at = self.sum_offset(persp, cell);
                self.dir_sum[sum_at..sum_at + c].fill(0);
                for dir in Direction::ALL {
                    let id = pattern_index_at(board, r, col, dir, persp);
                    self.counters.lookups += 1;
                    let slot = self.slot(persp, cell, dir);
                    self.ids[slot] = id;
                    let row = self.codebook.row(dir.group(), id);
                    self.line_features[slot * c..(slot + 1) * c].copy_from_slice(row);
                    for (s, v) in self.dir_sum[sum_at..sum_at + c].iter_mut().zip(row) {
                        *s += *v;
                    }
                }
            }
            self.rebuild_fprime(persp);
        }
        self.journal.clear();
    }

    fn rebuild_fprime(&mut self, persp: Color) {
        let c = self.channels;
        let half = c / 2;
        let (h, w) = (self.height as isize, self.width as isize);
        for cell in 0..self.height * self.width {
            let (r, col) = ((cell / self.width) as isize, (cell % self.width) as isize);
            let out = self.sum_offset(persp, cell);
            for k in 0..c {
                let v = if k < half {
                    let mut s = 0i32;
                    for tr in 0..3 {
                        for tc in 0..3 {
                            let (y, x) = (r + tr as isize - 1, col + tc as isize - 1);
                            if y < 0 || x < 0 || y >= h || x >= w {
                                continue;
                            }
                            let src = self.sum_offset(persp, (y * w + x) as usize);
                            let f = (self.dir_sum[src + k] as i32).max(0);
                            s += f * self.kernel[k * 9 + tr * 3 + tc] as i32;
                        }
                    }
                    s
                } else {
                    (self.dir_sum[out + k] as i32).max(0) * KERNEL_SCALE
                };
                self.fprime[out + k] = v;
            }
        }
    }

    #[inline]
    fn slot(&self, persp: Color, cell: usize, dir: Direction) -> usize {
        (persp.index() * self.height * self.width + cell) * 4 + dir.index()
    }

    #[inline]
    fn sum_offset(&self, persp: Color, cell: usize) -> usize {
        (persp.index() * self.height * self.width + cell) * self.channels
    }

    /// Pushes the change `d_f` of `F` at `cell` into `F'`.
    pub fn depthwise_delta(&mut self, persp: Color, cell: usize, d_f: &[i16]) {
        let c = self.channels;
        let half = c / 2;
        let (h, w) = (self.height as isize, self.width as isize);
        let (r, col) = ((cell / self.width) as isize, (cell % self.width) as isize);
        // F at (r, col) feeds F'(r - dr, col - dc) through tap (dr + 1, dc + 1).
        for tr in 0..3 {
            for tc in 0..3 {
                let (y, x) = (r - (tr as isize - 1), col - (tc as isize - 1));
                if y < 0 || x < 0 || y >= h || x >= w {
                    continue;
                }
                let out = self.sum_offset(persp, (y * w + x) as usize);
                for k in 0..half {
                    if d_f[k] != 0 {
                        self.fprime[out + k] += d_f[k] as i32 * self.kernel[k * 9 + tr * 3 + tc] as i32;
                    }
                }
            }
        }
        let out = self.sum_offset(persp, cell);
        for k in half..c {
            self.fprime[out + k] += d_f[k] as i32 * KERNEL_SCALE;
        }
    }

    /// Updates for the stone just placed at `mv`; `board` must already
    /// contain it as its last move.
    pub fn apply_move(&mut self, board: &Board, mv: Move) -> Result<(), AccumulatorError> {
        if board.last_move() != Some(mv) {
            return Err(AccumulatorError::NotLastMove(mv));
        }
        let color = board.history().last().expect("checked above").color;
        let c = self.channels;
        let affected = affected_cells(self.height, self.width, mv.row(), mv.col());
        let mut record = DeltaRecord {
            mv,
            color,
            changes: Vec::with_capacity(2 * affected.len()),
            features: Vec::with_capacity(4 * affected.len() * c),
        };
        for persp in [Color::Black, Color::White] {
            for &(cell_mv, dir) in &affected {
                let cell = board.index(cell_mv);
                let new_id = pattern_index_at(board, cell_mv.row(), cell_mv.col(), dir, persp);
                self.counters.lookups += 1;
                let slot = self.slot(persp, cell, dir);
                let old_id = self.ids[slot];
                record.changes.push(Change {
                    perspective: persp,
                    cell: cell as u16,
                    dir,
                    old_id,
                    new_id,
                });
                record
                    .features
                    .extend_from_slice(&self.line_features[slot * c..(slot + 1) * c]);
                record
                    .features
                    .extend_from_slice(self.codebook.row(dir.group(), new_id));
            }
        }
        self.replay(&record, false);
        self.journal.push(record);
        Ok(())
    }

    /// Reverts the most recent [`FeatureAccumulator::apply_move`].
    pub fn undo_move(&mut self) -> Result<DeltaRecord, AccumulatorError> {
        let record = self.journal.pop().ok_or(AccumulatorError::EmptyJournal)?;
        self.replay(&record, true);
        Ok(record)
    }

    /// Applies a record forwards or backwards. Changes of one cell are
    /// adjacent in the record: the moved cell appears once per direction,
    /// every other cell once.
    fn replay(&mut self, record: &DeltaRecord, reverse: bool) {
        let c = self.channels;
        let mut old_f = vec![0i16; c];
        let mut d_f = vec![0i16; c];
        // Group by (perspective, cell), preserving first-seen order.
        let mut groups: Vec<(Color, usize, Vec<usize>)> = Vec::with_capacity(record.changes.len());
        for (i, ch) in record.changes.iter().enumerate() {
            let cell = ch.cell as usize;
            match groups
                .iter_mut()
                .find(|(p, cl, _)| *p == ch.perspective && *cl == cell)
            {
                Some(g) => g.2.push(i),
                None => groups.push((ch.perspective, cell, vec![i])),
            }
        }
        for (persp, cell, idxs) in groups {
            let at = self.sum_offset(persp, cell);
            for (o, s) in old_f.iter_mut().zip(&self.dir_sum[at..at + c]) {
                *o = (*s).max(0);
            }
            for &i in &idxs {
                let ch = record.changes[i];
                let (from, to, id) = if reverse {
                    (record.new_feature(i, c), record.old_feature(i, c), ch.old_id)
                } else {
                    (record.old_feature(i, c), record.new_feature(i, c), ch.new_id)
                };
                let slot = self.slot(persp, cell, ch.dir);
                self.ids[slot] = id;
                self.line_features[slot * c..(slot + 1) * c].copy_from_slice(to);
                for k in 0..c {
                    self.dir_sum[at + k] += to[k] - from[k];
                }
            }
            let mut any = false;
            for k in 0..c {
                d_f[k] = self.dir_sum[at + k].max(0) - old_f[k];
                any |= d_f[k] != 0;
            }
            if any {
                self.counters.cell_updates += 1;
                self.depthwise_delta(persp, cell, &d_f);
            }
        }
    }

    pub fn journal_depth(&self) -> usize {
        self.journal.len()
    }

    pub fn last_record(&self) -> Option<&DeltaRecord> {
        self.journal.last()
    }

    pub fn counters(&self) -> Counters {
        self.counters
    }

    pub fn reset_counters(&mut self) {
        self.counters = Counters::default();
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn kernel(&self) -> &[i16] {
        &self.kernel
    }

    pub fn codebook(&self) -> &Arc<Codebook> {
        &self.codebook
    }

    /// Borrowed `F'` of `perspective`.
    pub fn feature_view(&self, perspective: Color) -> FeatureView<'_> {
        let area = self.height * self.width;
        let start = perspective.index() * area * self.channels;
        FeatureView {
            height: self.height,
            width: self.width,
            channels: self.channels,
            data: &self.fprime[start..start + area * self.channels],
        }
    }

    /// Copy of `F'` of `perspective`.
    pub fn read_feature_map(&self, perspective: Color) -> FeatureMap {
        let v = self.feature_view(perspective);
        FeatureMap {
            height: v.height,
            width: v.width,
            channels: v.channels,
            data: v.data.to_vec(),
        }
    }

    /// Aggregated directional sums of `perspective`, `[cell][C]`.
    pub fn dir_sums(&self, perspective: Color) -> &[i16] {
        let area = self.height * self.width;
        let start = perspective.index() * area * self.channels;
        &self.dir_sum[start..start + area * self.channels]
    }

    /// Largest `|dir_sum|` over both perspectives.
    pub fn max_dir_sum(&self) -> i32 {
        self.dir_sum.iter().map(|v| (*v as i32).abs()).max().unwrap_or(0)
    }

    /// True when the state equals a from-scratch rebuild on `board`.
    pub fn matches_board(&self, board: &Board) -> bool {
        let mut fresh = self.clone();
        fresh.refresh(board);
        fresh.fprime == self.fprime && fresh.dir_sum == self.dir_sum && fresh.ids == self.ids
    }
}
