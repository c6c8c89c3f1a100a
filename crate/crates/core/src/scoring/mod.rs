//! Per-image safety scores from perception counters, and maps of them.

mod color;
mod map;
mod redistribute;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::store::{counters_from_votes, Corpus, Counters, VoteSource};

pub use color::{color_for, hue_of};
pub use map::{emit_map, write_map, write_scores_csv, Feature, FeatureCollection, MapProperties, Point};
pub use redistribute::{redistribute_all, redistribute_neutral, TieGraph};

#[derive(Debug, Error)]
pub enum ScoringError {
    #[error("score {0} outside [0, 1]")]
    OutOfRange(f64),
    #[error("zone {0:?} has no scored images")]
    NoScores(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerceptionScore {
    pub image_id: String,
    pub positive_pct: f64,
    pub negative_pct: f64,
    /// Share of the image's votes that were ties, before redistribution.
    pub neutral_pct: f64,
    pub score01: f64,
    pub color: String,
}

/// Scores redistributed counters. `raw_neutral_share` is the tie share of
/// the counters before redistribution and is reported as-is.
///
/// Returns `None` (unscored) when there is no charged evidence.
pub fn score(image_id: &str, counters: Counters, raw_neutral_share: f64) -> Option<PerceptionScore> {
    let charged = counters.pos + counters.neg;
    if charged <= 0.0 {
        return None;
    }
    let score01 = (counters.pos / charged).clamp(0.0, 1.0);
    Some(PerceptionScore {
        image_id: image_id.to_owned(),
        positive_pct: 100.0 * score01,
        negative_pct: 100.0 * (1.0 - score01),
        neutral_pct: 100.0 * raw_neutral_share,
        score01,
        color: color_for(score01).expect("score01 is clamped to [0, 1]"),
    })
}

/// Which votes contribute to a score.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceFilter {
    #[default]
    All,
    Human,
    Synthetic,
}

impl SourceFilter {
    pub fn admits(self, source: VoteSource) -> bool {
        match self {
            SourceFilter::All => true,
            SourceFilter::Human => source == VoteSource::Human,
            SourceFilter::Synthetic => source == VoteSource::Synthetic,
        }
    }
}

impl std::str::FromStr for SourceFilter {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "all" => Ok(Self::All),
            "human" => Ok(Self::Human),
            "synthetic" => Ok(Self::Synthetic),
            other => Err(format!("unknown vote source {other:?} (all, human, synthetic)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredImage {
    pub lat: f64,
    pub lon: f64,
    pub score: PerceptionScore,
}

/// Scores every image of `zone` from the admitted votes, sorted by image id.
///
/// Counters and the tie graph are rebuilt from the filtered vote log, so
/// human and synthetic maps of one zone are computed independently.
pub fn score_zone(corpus: &Corpus, zone: &str, filter: SourceFilter) -> Vec<ScoredImage> {
    let votes: Vec<_> = corpus.votes().iter().filter(|v| filter.admits(v.source)).collect();
    let snapshot = counters_from_votes(votes.iter().copied());
    let ties = TieGraph::from_votes(votes.iter().copied());
    let redistributed = redistribute_all(&snapshot, &ties);
    let mut out: Vec<ScoredImage> = corpus
        .images_in_zone(zone)
        .filter_map(|img| {
            let raw = snapshot.get(&img.image_id)?;
            let share = if raw.total() > 0.0 { raw.neu / raw.total() } else { 0.0 };
            let s = score(&img.image_id, redistributed[&img.image_id], share)?;
            Some(ScoredImage { lat: img.lat, lon: img.lon, score: s })
        })
        .collect();
    out.sort_by(|a, b| a.score.image_id.cmp(&b.score.image_id));
    out
}
