//! Stacked LSTM/GRU forecaster written from scratch: forward pass,
//! backpropagation through time, Adam, dropout, batch normalization and
//! L2 weight decay.
//!
//! The network is multivariate: each timestep feeds all `N` series into the
//! first layer, and a dense head emits all `N * H` targets at once.

use serde::{Deserialize, Serialize};

mod adam;
pub mod cell;
mod checkpoint;
mod network;
mod params;
mod train;

pub use adam::{adam_step, AdamState, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use cell::{gru_cell, lstm_cell, rnn_cell, GateParams};
pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointManifest};
pub use network::{loss, BnStats, Cache, Masks, Mode, Network, BN_EPS, BN_MOMENTUM};
pub use params::{Block, Layout};
pub use train::{predict, train, train_with, TrainHistory, TrainedModel};

#[derive(Debug, thiserror::Error)]
pub enum NeuralError {
    #[error("invalid hyper-parameters: {0}")]
    InvalidHyperParams(String),
    #[error("shape mismatch: expected {expected}, found {found}")]
    Shape { expected: String, found: String },
    #[error("batch normalization needs at least two samples per training batch")]
    DegenerateBatch,
    #[error("empty dataset")]
    EmptyDataset,
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("non-finite gradient at step {step} in parameter block {block}")]
    NonFiniteGradient { step: u64, block: String },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("checkpoint i/o: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellKind {
    Lstm,
    Gru,
}

impl CellKind {
    /// Gate blocks per layer.
    pub fn n_gates(self) -> usize {
        match self {
            CellKind::Lstm => 4,
            CellKind::Gru => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CellKind::Lstm => "lstm",
            CellKind::Gru => "gru",
        }
    }
}

impl std::fmt::Display for CellKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for CellKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "lstm" => Ok(CellKind::Lstm),
            "gru" => Ok(CellKind::Gru),
            _ => Err(format!("unknown cell `{s}`")),
        }
    }
}

/// Dense-head activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "tanh" => Ok(Activation::Tanh),
            "relu" => Ok(Activation::Relu),
            _ => Err(format!("unknown activation `{s}`")),
        }
    }
}

pub const UNIT_CHOICES: [usize; 5] = [8, 16, 32, 64, 128];
pub const BATCH_CHOICES: [usize; 4] = [8, 16, 32, 64];
pub const LR_RANGE: (f64, f64) = (0.001, 0.1);
pub const LAYER_RANGE: (usize, usize) = (1, 5);
pub const EPOCH_RANGE: (usize, usize) = (1, 30);
pub const WEIGHT_DECAY_MAX: f64 = 0.1;

/// One point of the tuning space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub learning_rate: f64,
    pub n_layers: usize,
    pub units: usize,
    pub dropout_input: f64,
    pub dropout_hidden: f64,
    pub batch_size: usize,
    pub use_batchnorm: bool,
    pub bn_before_dropout: bool,
    pub activation: Activation,
    pub weight_decay: f64,
    pub epochs: usize,
    pub cell: CellKind,
}

impl HyperParams {
    pub fn validate(&self) -> Result<(), NeuralError> {
        let bad = |m: String| Err(NeuralError::InvalidHyperParams(m));
        let (lo, hi) = LR_RANGE;
        if !(lo..=hi).contains(&self.learning_rate) {
            return bad(format!("learning_rate {} outside [{lo}, {hi}]", self.learning_rate));
        }
        if !(LAYER_RANGE.0..=LAYER_RANGE.1).contains(&self.n_layers) {
            return bad(format!("n_layers {} outside 1..=5", self.n_layers));
        }
        if !UNIT_CHOICES.contains(&self.units) {
            return bad(format!("units {} not in {UNIT_CHOICES:?}", self.units));
        }
        for (name, r) in [("dropout_input", self.dropout_input), ("dropout_hidden", self.dropout_hidden)] {
            if !(0.0..1.0).contains(&r) {
                return bad(format!("{name} {r} outside [0, 1)"));
            }
        }
        if !BATCH_CHOICES.contains(&self.batch_size) {
            return bad(format!("batch_size {} not in {BATCH_CHOICES:?}", self.batch_size));
        }
        if !(0.0..=WEIGHT_DECAY_MAX).contains(&self.weight_decay) {
            return bad(format!("weight_decay {} outside [0, {WEIGHT_DECAY_MAX}]", self.weight_decay));
        }
        if !(EPOCH_RANGE.0..=EPOCH_RANGE.1).contains(&self.epochs) {
            return bad(format!("epochs {} outside 1..=30", self.epochs));
        }
        Ok(())
    }

    pub fn topology(&self, n_series: usize, input_len: usize, horizon: usize) -> Topology {
        Topology {
            n_series,
            input_len,
            horizon,
            cell: self.cell,
            n_layers: self.n_layers,
            units: self.units,
            activation: self.activation,
            use_batchnorm: self.use_batchnorm,
            bn_before_dropout: self.bn_before_dropout,
            dropout_input: self.dropout_input,
            dropout_hidden: self.dropout_hidden,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            epochs: self.epochs,
            weight_decay: self.weight_decay,
        }
    }
}

/// Network shape and regularization layers. Unlike [`HyperParams`] this is
/// not range-checked beyond what the arithmetic needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub n_series: usize,
    pub input_len: usize,
    pub horizon: usize,
    pub cell: CellKind,
    pub n_layers: usize,
    pub units: usize,
    pub activation: Activation,
    pub use_batchnorm: bool,
    pub bn_before_dropout: bool,
    pub dropout_input: f64,
    pub dropout_hidden: f64,
}

impl Topology {
    pub fn n_outputs(&self) -> usize {
        self.n_series * self.horizon
    }

    pub fn validate(&self) -> Result<(), NeuralError> {
        if self.n_series == 0 || self.input_len == 0 || self.horizon == 0 || self.n_layers == 0 || self.units == 0 {
            return Err(NeuralError::InvalidHyperParams("topology dimensions must be positive".into()));
        }
        for r in [self.dropout_input, self.dropout_hidden] {
            if !(0.0..1.0).contains(&r) {
                return Err(NeuralError::InvalidHyperParams(format!("dropout {r} outside [0, 1)")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub weight_decay: f64,
}
