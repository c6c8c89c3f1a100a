//! Fully connected two-class network over concatenated pair features.
//!
//! `input → ReLU hidden layer → 2 logits → softmax`, trained with Adam on
//! mean cross-entropy. Dropout is inverted (scaled at train time) at three
//! sites: the input, the hidden activations, and the output layer.

mod adam;
mod checkpoint;
mod eval;
mod network;
mod params;
mod train;

use thiserror::Error;

pub use adam::Adam;
pub use checkpoint::{write_curves, Checkpoint, EpochRecord};
pub use eval::{evaluate, predict, swap_consistency_rate, tally, ConfusionMatrix};
pub use network::{forward, loss_and_grads, mean_loss, Dropout, ForwardCache, Mode, OutputDropoutSite};
pub use params::{ModelParams, NUM_CLASSES};
pub use train::{train, TrainConfig, TrainOutcome};

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite {0} during forward pass")]
    NonFinite(&'static str),
    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Diverged { epoch: usize, loss: f64 },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{0} set is empty")]
    EmptyPartition(&'static str),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
