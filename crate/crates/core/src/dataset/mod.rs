//! Turns charged votes into normalized pair examples and splits them into
//! train/validation/test partitions.

mod examples;
mod io;
mod split;
mod stats;

use thiserror::Error;

use crate::store::StoreError;

pub use examples::{build_examples, TrainingExample};
pub use io::{read_dataset, read_stats, write_dataset, write_stats, LabelRow};
pub use split::{split, Partition, Partitions, SplitSpec};
pub use stats::{NormalizationStats, DEFAULT_EPSILON};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot compute normalization statistics: {0}")]
    Stats(String),
    #[error("vote {vote_id:?}: no feature vector for image {image_id:?}")]
    MissingFeature { vote_id: String, image_id: String },
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("{0} partition is empty")]
    EmptyPartition(Partition),
    #[error("dataset format: {0}")]
    Format(String),
    #[error(transparent)]
    Store(#[from] StoreError),
}
