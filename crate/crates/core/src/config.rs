//! Engine configuration, loaded from TOML.
//!
//! ```toml
//! backend = "alphabeta"      # or "mcts"
//! evaluator = "mixnet"       # or "shape"
//! weights = "model.mixw"     # omit to use seeded random weights
//! codebook_cache = "model.mixc"
//! model = "small"            # size of the random model
//! board_size = 15
//!
//! [time]
//! turn_ms = 5000
//!
//! [alphabeta]
//! max_depth = 8
//! ```

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::board::{Board, MAX_SIZE, MIN_SIZE};
use crate::eval::{MixnetEvaluator, Model, ShapeEvaluator};
use crate::search::{AbParams, AlphaBeta, Mcts, MctsParams, Searcher};
use crate::weights::{ModelError, NetConfig, DEFAULT_INIT_SEED};

/// Environment variable naming the default weight file.
pub const WEIGHTS_ENV: &str = "MIXNET_WEIGHTS";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Mcts,
    Alphabeta,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvaluatorKind {
    Mixnet,
    Shape,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeControl {
    /// Budget per move in milliseconds; 0 means no per-move limit.
    pub turn_ms: u64,
    /// Budget for the whole game in milliseconds; 0 means unlimited.
    pub match_ms: u64,
    /// Held back from every move for protocol overhead.
    pub safety_ms: u64,
}

impl Default for TimeControl {
    fn default() -> Self {
        TimeControl {
            turn_ms: 5000,
            match_ms: 0,
            safety_ms: 50,
        }
    }
}

impl TimeControl {
    /// Time to spend on one move: 90% of the per-move budget, capped by
    /// an even share of the remaining match time, minus the safety margin.
    pub fn move_budget(&self, time_left_ms: Option<u64>, empty_cells: usize) -> Duration {
        let mut ms = if self.turn_ms > 0 { self.turn_ms } else { u64::MAX };
        if let Some(left) = time_left_ms {
            let share = left / (empty_cells as u64 / 2).clamp(5, 60);
            ms = ms.min(share);
        }
        if ms == u64::MAX {
            return Duration::from_secs(3600);
        }
        let ms = (ms as f64 * 0.9) as u64;
        Duration::from_millis(ms.saturating_sub(self.safety_ms).max(5))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub backend: Backend,
    pub evaluator: EvaluatorKind,
    pub weights: Option<PathBuf>,
    pub codebook_cache: Option<PathBuf>,
    /// Network size used for random weights when no file is given.
    pub model: String,
    pub seed: u64,
    pub board_size: usize,
    pub time: TimeControl,
    pub mcts: MctsParams,
    pub alphabeta: AbParams,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            backend: Backend::Alphabeta,
            evaluator: EvaluatorKind::Mixnet,
            weights: None,
            codebook_cache: None,
            model: "small".into(),
            seed: DEFAULT_INIT_SEED,
            board_size: 15,
            time: TimeControl::default(),
            mcts: MctsParams::default(),
            alphabeta: AbParams::default(),
        }
    }
}

impl EngineConfig {
    pub fn from_toml(text: &str) -> Result<EngineConfig, ConfigError> {
        let cfg: EngineConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<EngineConfig, ConfigError> {
        EngineConfig::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(MIN_SIZE..=MAX_SIZE).contains(&self.board_size) {
            return Err(ConfigError::Invalid(format!(
                "board_size must be in {MIN_SIZE}..={MAX_SIZE}"
            )));
        }
        if NetConfig::by_name(&self.model).is_none() {
            return Err(ConfigError::Invalid(format!("unknown model `{}`", self.model)));
        }
        self.alphabeta.validate().map_err(ConfigError::Invalid)?;
        let m = &self.mcts;
        if [m.c_puct_init, m.c_puct_log, m.c_puct_base, m.c_fpu, m.lcb_z]
            .iter()
            .any(|v| !(v.is_finite() && *v > 0.0))
        {
            return Err(ConfigError::Invalid("MCTS parameters must be positive".into()));
        }
        Ok(())
    }

    /// Weight path from the config, else from the environment.
    pub fn weights_path(&self) -> Option<PathBuf> {
        self.weights
            .clone()
            .or_else(|| std::env::var_os(WEIGHTS_ENV).map(PathBuf::from))
    }

    /// Loads the configured weights or builds the seeded random model.
    pub fn load_model(&self) -> Result<Arc<Model>, ConfigError> {
        let model = match self.weights_path() {
            Some(p) => Model::load(p, self.codebook_cache.as_deref())?,
            None => {
                let cfg = NetConfig::by_name(&self.model).expect("validated");
                Model::random(cfg, self.seed)?
            }
        };
        Ok(Arc::new(model))
    }

    pub fn new_board(&self) -> Board {
        Board::new(self.board_size, self.board_size).expect("validated size")
    }

    /// Builds the configured searcher. `model` is reused when given and
    /// the evaluator needs one.
    pub fn build_searcher(&self, model: Option<Arc<Model>>) -> Result<Box<dyn Searcher>, ConfigError> {
        let board = self.new_board();
        Ok(match self.evaluator {
            EvaluatorKind::Shape => self.wrap(ShapeEvaluator::new()),
            EvaluatorKind::Mixnet => {
                let model = match model {
                    Some(m) => m,
                    None => self.load_model()?,
                };
                self.wrap(MixnetEvaluator::new(model, &board))
            }
        })
    }

    fn wrap<E: crate::eval::Evaluator + 'static>(&self, eval: E) -> Box<dyn Searcher> {
        match self.backend {
            Backend::Mcts => Box::new(Mcts::new(self.mcts.clone(), eval)),
            Backend::Alphabeta => Box::new(AlphaBeta::new(self.alphabeta.clone(), eval)),
        }
    }
}
