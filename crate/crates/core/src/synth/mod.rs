//! Synthetic votes for zones without human judgments.
//!
//! [`plan_pairs`] decides which images to compare; [`predict_pairs`] asks a
//! scorer (normally the trained network) to judge each pair, turning
//! low-confidence judgments into ties.

mod hilbert;
mod plan;
mod predict;

use thiserror::Error;

use crate::nn::NnError;
use crate::store::StoreError;

pub use hilbert::{hilbert_index, hilbert_sort};
pub use plan::{expected_pairs, plan_pairs, SyntheticPair, SyntheticPairPlan, MIN_ZONE_IMAGES, SUBGROUPS};
pub use predict::{code_from_probs, predict_pairs, record_synthetic, ModelScorer, PairScorer, PredictionConfig};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("zone {zone:?} has {found} images; at least {needed} are needed")]
    TooFewImages { zone: String, found: usize, needed: usize },
    #[error("no feature vector for image {0:?}")]
    MissingFeature(String),
    #[error("margin {0} outside [0, 1)")]
    InvalidMargin(f64),
    #[error(transparent)]
    Model(#[from] NnError),
    #[error(transparent)]
    Store(#[from] StoreError),
}
