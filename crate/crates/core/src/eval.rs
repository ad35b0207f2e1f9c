//! Position evaluators used by the searches.
//!
//! Searches drive an evaluator in lockstep with the board: after
//! `board.place(mv)` they call [`Evaluator::push`], and after
//! `board.undo()` they call [`Evaluator::pop`]. Evaluations are from the
//! perspective of the side to move.

use std::path::Path;
use std::sync::Arc;

use crate::accumulator::{quantize_kernel, AccumulatorError, FeatureAccumulator};
use crate::board::{Board, Cell, Color, Move};
use crate::codebook::Codebook;
use crate::heads::{Evaluation, Heads};
use crate::nn::softmax;
use crate::threats::{five_cells, threat_score};
use crate::weights::{ModelError, NetConfig, NetWeights};

pub trait Evaluator: Send {
    /// Resynchronizes with `board`, discarding any pushed moves.
    fn reset(&mut self, board: &Board);
    /// Called after `mv` was placed on `board`.
    fn push(&mut self, board: &Board, mv: Move);
    /// Called after the last pushed move was undone.
    fn pop(&mut self);
    fn evaluate(&mut self, board: &Board) -> Evaluation;
    fn name(&self) -> String;
    /// Codebook lookups performed so far, when meaningful.
    fn lookups(&self) -> u64 {
        0
    }
}

/// Empty-cell mask of `board`; all false once the game is over.
pub fn legal_mask(board: &Board) -> Vec<bool> {
    if board.outcome().is_over() {
        return vec![false; board.area()];
    }
    board.cells().iter().map(|&c| c == Cell::Empty).collect()
}

/// Float weights together with their baked codebook and quantized heads.
#[derive(Debug)]
pub struct Model {
    weights: NetWeights,
    codebook: Arc<Codebook>,
    heads: Heads,
    kernel: Vec<i16>,
    digest: u64,
}

impl Model {
    /// Bakes the codebook from `weights`.
    pub fn new(weights: NetWeights) -> Result<Model, ModelError> {
        let codebook = Codebook::bake(&weights)?;
        Model::with_codebook(weights, codebook)
    }

    /// Uses a codebook baked earlier from the same weights.
    pub fn with_codebook(weights: NetWeights, codebook: Codebook) -> Result<Model, ModelError> {
        weights.config.validate()?;
        weights.check_finite()?;
        if codebook.config() != weights.config {
            return Err(ModelError::ConfigMismatch(format!(
                "codebook baked for {:?}, weights are {:?}",
                codebook.config(),
                weights.config
            )));
        }
        Ok(Model {
            heads: Heads::new(weights.config, &weights.heads),
            kernel: quantize_kernel(&weights.depthwise),
            digest: weights.digest(),
            codebook: Arc::new(codebook),
            weights,
        })
    }

    /// Loads weights, reusing or refreshing the codebook cache next to them
    /// when `cache` is given.
    pub fn load(path: impl AsRef<Path>, cache: Option<&Path>) -> Result<Model, ModelError> {
        let weights = NetWeights::load(path)?;
        match cache {
            Some(c) => {
                let (cb, _) = Codebook::load_or_bake(&weights, c)?;
                Model::with_codebook(weights, cb)
            }
            None => Model::new(weights),
        }
    }

    /// Seeded random model, for runs without trained weights.
    pub fn random(config: NetConfig, seed: u64) -> Result<Model, ModelError> {
        Model::new(NetWeights::random(config, seed)?)
    }

    pub fn config(&self) -> NetConfig {
        self.weights.config
    }

    pub fn weights(&self) -> &NetWeights {
        &self.weights
    }

    pub fn codebook(&self) -> &Arc<Codebook> {
        &self.codebook
    }

    pub fn heads(&self) -> &Heads {
        &self.heads
    }

    pub fn kernel(&self) -> &[i16] {
        &self.kernel
    }

    pub fn digest(&self) -> u64 {
        self.digest
    }

    pub fn accumulator(&self, board: &Board) -> Result<FeatureAccumulator, AccumulatorError> {
        FeatureAccumulator::new(self.codebook.clone(), self.kernel.clone(), board)
    }
}

/// Incremental evaluator over a shared [`Model`].
#[derive(Debug, Clone)]
pub struct MixnetEvaluator {
    model: Arc<Model>,
    acc: FeatureAccumulator,
}

impl MixnetEvaluator {
    pub fn new(model: Arc<Model>, board: &Board) -> MixnetEvaluator {
        let acc = model.accumulator(board).expect("model kernel matches its codebook");
        MixnetEvaluator { model, acc }
    }

    pub fn model(&self) -> &Arc<Model> {
        &self.model
    }

    pub fn accumulator(&self) -> &FeatureAccumulator {
        &self.acc
    }

    /// Float reference evaluation of the current feature map.
    pub fn evaluate_float(&self, board: &Board) -> Evaluation {
        let view = self.acc.feature_view(board.side_to_move());
        self.model.heads.evaluate_float(view, &legal_mask(board))
    }
}

impl Evaluator for MixnetEvaluator {
    fn reset(&mut self, board: &Board) {
        let view = self.acc.feature_view(Color::Black);
        if (board.height(), board.width()) == (view.height, view.width) {
            self.acc.refresh(board);
        } else {
            self.acc = self.model.accumulator(board).expect("model kernel matches its codebook");
        }
    }

    fn push(&mut self, board: &Board, mv: Move) {
        self.acc
            .apply_move(board, mv)
            .expect("push follows board.place");
    }

    fn pop(&mut self) {
        self.acc.undo_move().expect("pop matches an earlier push");
    }

    fn evaluate(&mut self, board: &Board) -> Evaluation {
        let view = self.acc.feature_view(board.side_to_move());
        self.model.heads.evaluate(view, &legal_mask(board))
    }

    fn name(&self) -> String {
        let c = self.model.config();
        format!("mixnet-{}x{}-{:016x}", c.mapping, c.feature, self.model.digest)
    }

    fn lookups(&self) -> u64 {
        self.acc.counters().lookups
    }
}

/// Hand-written evaluator from line shapes. Stateless and cheap; used as
/// a baseline opponent and in tests.
#[derive(Debug, Clone, Default)]
pub struct ShapeEvaluator {
    /// Softmax temperature over ordering scores.
    pub temperature: f64,
}

impl ShapeEvaluator {
    pub fn new() -> ShapeEvaluator {
        ShapeEvaluator { temperature: 400.0 }
    }
}

impl Evaluator for ShapeEvaluator {
    fn reset(&mut self, _board: &Board) {}

    fn push(&mut self, _board: &Board, _mv: Move) {}

    fn pop(&mut self) {}

    fn evaluate(&mut self, board: &Board) -> Evaluation {
        let mask = legal_mask(board);
        let mut policy = vec![0.0; board.area()];
        if board.outcome().is_over() {
            let value = match board.outcome().winner() {
                Some(w) if w == board.side_to_move() => [1.0, 0.0, 0.0],
                Some(_) => [0.0, 1.0, 0.0],
                None => [0.0, 0.0, 1.0],
            };
            return Evaluation { value, policy };
        }
        let me = board.side_to_move();
        let cands = board.candidate_moves(2);
        let scores: Vec<f64> = cands
            .iter()
            .map(|&m| threat_score(board, m, me) as f64 / self.temperature.max(1e-9))
            .collect();
        for (m, p) in cands.iter().zip(softmax(&scores)) {
            policy[board.index(*m)] = p;
        }
        debug_assert!(policy.iter().zip(&mask).all(|(p, l)| *p == 0.0 || *l));

        let value = if !five_cells(board, me).is_empty() {
            [0.98, 0.01, 0.01]
        } else if five_cells(board, me.opponent()).len() >= 2 {
            [0.01, 0.98, 0.01]
        } else {
            let best = scores.iter().cloned().fold(0.0f64, f64::max) * self.temperature;
            let their = board
                .candidate_moves(2)
                .iter()
                .map(|&m| threat_score(board, m, me.opponent()))
                .max()
                .unwrap_or(0) as f64;
            let x = ((best - 0.8 * their) / 4000.0).tanh() * 0.8;
            let draw = 0.1;
            let win = (1.0 - draw) * (1.0 + x) / 2.0;
            [win, 1.0 - draw - win, draw]
        };
        Evaluation { value, policy }
    }

    fn name(&self) -> String {
        "shape".into()
    }
}
