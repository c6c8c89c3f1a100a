//! Street-image safety perception from pairwise crowd judgments.
//!
//! The crate is organized as a pipeline:
//!
//! - [`store`]: the corpus of images, feature vectors, votes and perception
//!   counters, with its on-disk formats.
//! - [`ingest`]: geofenced crawling, descriptor-count filtering and feature
//!   ingestion.
//! - [`survey`]: pair serving policies, vote coding and log housekeeping.
//! - [`dataset`]: vote-to-example transformation, normalization and splits.
//! - [`nn`]: the two-class perceptron, its training loop and evaluation.
//! - [`synth`]: synthetic pair generation and model-annotated votes.
//! - [`scoring`]: neutral redistribution, per-image scores and GeoJSON maps.

pub mod dataset;
pub mod fixture;
pub mod geo;
pub mod ingest;
pub mod nn;
pub mod scoring;
pub mod store;
pub mod survey;
pub mod synth;

/// Length of a single image feature vector.
pub const FEATURE_DIM: usize = 512;

/// Length of a pair example: left features followed by right features.
pub const PAIR_DIM: usize = 2 * FEATURE_DIM;
