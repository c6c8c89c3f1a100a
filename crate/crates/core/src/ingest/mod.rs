//! Image acquisition: geofenced grid crawling through a street-imagery
//! provider, descriptor-count filtering and feature-vector ingestion.

mod crawl;
mod descriptors;
mod features;
mod geofence;
mod provider;

use thiserror::Error;

use crate::store::StoreError;

pub use crawl::{plan_crawl, CrawlPlan, SamplePoint, DEFAULT_HEADINGS};
pub use descriptors::{
    assign_descriptor_counts, filter_images, CommandCounter, DescriptorCounter, MetadataCounts,
    DEFAULT_MIN_DESCRIPTORS,
};
pub use features::{ingest_features, IngestReport};
pub use geofence::Geofence;
pub use provider::{
    fetch_images, FetchOptions, FetchReport, ImageryProvider, ProviderError, StreetViewClient,
    DEFAULT_PROVIDER_URL, ENV_PROVIDER_KEY, ENV_PROVIDER_URL,
};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("invalid crawl plan: {0}")]
    InvalidPlan(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("all {attempted} provider requests failed")]
    AllFailed { attempted: usize },
    #[error("image {0:?} has no descriptor count")]
    MissingDescriptorCount(String),
    #[error("descriptor count for {id:?}: {message}")]
    DescriptorCount { id: String, message: String },
    #[error("feature file format: {0}")]
    Format(String),
    #[error("image {0:?} has more than one feature row")]
    Conflict(String),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
