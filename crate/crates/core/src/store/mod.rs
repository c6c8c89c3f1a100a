//! Canonical data model and persistent store.
//!
//! The vote log is the authority: perception counters on each image are a
//! cache that [`Corpus::rebuild_counters`] can always regenerate by replay.

pub mod binary;
mod io;

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::valid_coordinates;
use crate::FEATURE_DIM;

pub use io::{append_vote, read_votes, write_votes, DataPaths};
pub(crate) use io::{read_indexed_matrix as io_read_indexed_matrix, read_jsonl, write_jsonl};
#[cfg(test)]
pub(crate) use io::write_indexed_matrix as io_write_indexed_matrix;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("invalid image {id:?}: {reason}")]
    InvalidImage { id: String, reason: String },
    #[error("image {0:?} is already stored with a different payload")]
    Conflict(String),
    #[error("unknown image {0:?}")]
    NotFound(String),
    #[error("invalid vote {vote_id:?}: {reason}")]
    InvalidVote { vote_id: String, reason: String },
    #[error("invalid feature vector for {id:?}: {reason}")]
    InvalidFeature { id: String, reason: String },
    #[error("{}:{line}: {message}", path.display())]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("{}: {source}", path.display())]
    Binary {
        path: PathBuf,
        #[source]
        source: binary::BinaryError,
    },
    #[error("referential integrity: {0}")]
    Integrity(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Positive, negative and neutral perception tallies of one image.
///
/// Human and synthetic votes only ever add whole units; fractional values
/// appear after neutral redistribution.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Counters {
    pub pos: f64,
    pub neg: f64,
    pub neu: f64,
}

impl Counters {
    pub fn total(&self) -> f64 {
        self.pos + self.neg + self.neu
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StreetImage {
    pub image_id: String,
    pub lat: f64,
    pub lon: f64,
    pub zone: String,
    pub uri: String,
    /// Local descriptor count; `None` until a descriptor-count provider ran.
    pub descriptor_count: Option<u32>,
    #[serde(flatten)]
    pub counters: Counters,
}

impl StreetImage {
    pub fn new(image_id: impl Into<String>, lat: f64, lon: f64, zone: impl Into<String>) -> Self {
        Self {
            image_id: image_id.into(),
            lat,
            lon,
            zone: zone.into(),
            uri: String::new(),
            descriptor_count: None,
            counters: Counters::default(),
        }
    }

    pub fn with_uri(mut self, uri: impl Into<String>) -> Self {
        self.uri = uri.into();
        self
    }

    pub fn with_descriptor_count(mut self, count: u32) -> Self {
        self.descriptor_count = Some(count);
        self
    }

    fn validate(&self) -> Result<(), StoreError> {
        let invalid = |reason: &str| StoreError::InvalidImage {
            id: self.image_id.clone(),
            reason: reason.to_owned(),
        };
        if self.image_id.is_empty() {
            return Err(invalid("empty image id"));
        }
        if !valid_coordinates(self.lat, self.lon) {
            return Err(invalid("coordinates out of range"));
        }
        let c = &self.counters;
        if [c.pos, c.neg, c.neu].iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(invalid("counters must be finite and non-negative"));
        }
        Ok(())
    }
}

/// A 512-component image descriptor produced by an external extractor.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector {
    image_id: String,
    values: Vec<f32>,
}

impl FeatureVector {
    pub fn new(image_id: impl Into<String>, values: Vec<f32>) -> Result<Self, StoreError> {
        let image_id = image_id.into();
        if values.len() != FEATURE_DIM {
            return Err(StoreError::InvalidFeature {
                id: image_id,
                reason: format!("length {} (expected {FEATURE_DIM})", values.len()),
            });
        }
        if let Some(j) = values.iter().position(|v| !v.is_finite()) {
            return Err(StoreError::InvalidFeature {
                id: image_id,
                reason: format!("component {j} is not finite"),
            });
        }
        Ok(Self { image_id, values })
    }

    pub fn image_id(&self) -> &str {
        &self.image_id
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }
}

/// Vote coding: left image safer is 1, equal is 0, right image safer is 2.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum VoteCode {
    Tie = 0,
    Left = 1,
    Right = 2,
}

impl VoteCode {
    pub fn is_charged(self) -> bool {
        self != VoteCode::Tie
    }

    /// The code the same judgment gets when the two images swap sides.
    pub fn swapped(self) -> Self {
        match self {
            VoteCode::Tie => VoteCode::Tie,
            VoteCode::Left => VoteCode::Right,
            VoteCode::Right => VoteCode::Left,
        }
    }
}

impl TryFrom<u8> for VoteCode {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        match v {
            0 => Ok(VoteCode::Tie),
            1 => Ok(VoteCode::Left),
            2 => Ok(VoteCode::Right),
            other => Err(format!("vote code must be 0, 1 or 2, got {other}")),
        }
    }
}

impl From<VoteCode> for u8 {
    fn from(c: VoteCode) -> u8 {
        c as u8
    }
}

impl fmt::Display for VoteCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", *self as u8)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VoteSource {
    Human,
    Synthetic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vote {
    pub vote_id: String,
    pub left_id: String,
    pub right_id: String,
    pub code: VoteCode,
    pub source: VoteSource,
    pub session_id: String,
    #[serde(rename = "ts")]
    pub timestamp: DateTime<Utc>,
}

/// Applies one vote to a counter table, creating missing entries.
fn apply_vote(counters: &mut BTreeMap<String, Counters>, vote: &Vote) {
    let (left_delta, right_delta) = match vote.code {
        VoteCode::Left => ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0)),
        VoteCode::Right => ((0.0, 1.0, 0.0), (1.0, 0.0, 0.0)),
        VoteCode::Tie => ((0.0, 0.0, 1.0), (0.0, 0.0, 1.0)),
    };
    for (id, (p, n, u)) in [(&vote.left_id, left_delta), (&vote.right_id, right_delta)] {
        let c = counters.entry(id.clone()).or_default();
        c.pos += p;
        c.neg += n;
        c.neu += u;
    }
}

/// Counter table obtained by replaying `votes` from zero.
///
/// Only images that appear in at least one vote get an entry.
pub fn counters_from_votes<'a>(votes: impl IntoIterator<Item = &'a Vote>) -> BTreeMap<String, Counters> {
    let mut table = BTreeMap::new();
    for v in votes {
        apply_vote(&mut table, v);
    }
    table
}

/// Vote totals, as reported by the stats endpoint.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteStats {
    pub by_code: BTreeMap<String, u64>,
    pub by_source: BTreeMap<String, u64>,
    pub images: ImageStats,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageStats {
    pub total: u64,
    pub with_features: u64,
}

impl VoteStats {
    pub fn total_votes(&self) -> u64 {
        self.by_code.values().sum()
    }
}

/// Images, features and the vote log, held in memory.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Corpus {
    images: BTreeMap<String, StreetImage>,
    features: BTreeMap<String, FeatureVector>,
    votes: Vec<Vote>,
}

impl Corpus {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts an image. Re-inserting an identical record is a no-op.
    pub fn put_image(&mut self, img: StreetImage) -> Result<String, StoreError> {
        img.validate()?;
        if let Some(existing) = self.images.get(&img.image_id) {
            return if *existing == img {
                Ok(img.image_id)
            } else {
                Err(StoreError::Conflict(img.image_id))
            };
        }
        let id = img.image_id.clone();
        self.images.insert(id.clone(), img);
        Ok(id)
    }

    pub fn image(&self, id: &str) -> Option<&StreetImage> {
        self.images.get(id)
    }

    pub fn images(&self) -> impl ExactSizeIterator<Item = &StreetImage> {
        self.images.values()
    }

    pub fn images_in_zone<'a>(&'a self, zone: &'a str) -> impl Iterator<Item = &'a StreetImage> + 'a {
        self.images.values().filter(move |img| img.zone == zone)
    }

    pub fn zones(&self) -> Vec<String> {
        let mut zones: Vec<String> = self.images.values().map(|i| i.zone.clone()).collect();
        zones.sort();
        zones.dedup();
        zones
    }

    /// Removes an image that has no votes; its feature vector goes with it.
    pub fn remove_image(&mut self, id: &str) -> Result<StreetImage, StoreError> {
        if self.votes.iter().any(|v| v.left_id == id || v.right_id == id) {
            return Err(StoreError::Integrity(format!("image {id:?} is referenced by votes")));
        }
        self.features.remove(id);
        self.images.remove(id).ok_or_else(|| StoreError::NotFound(id.to_owned()))
    }

    pub fn set_descriptor_count(&mut self, id: &str, count: u32) -> Result<(), StoreError> {
        let img = self.images.get_mut(id).ok_or_else(|| StoreError::NotFound(id.to_owned()))?;
        img.descriptor_count = Some(count);
        Ok(())
    }

    /// Attaches a feature vector. A second, different vector for the same
    /// image is a conflict.
    pub fn put_features(&mut self, fv: FeatureVector) -> Result<(), StoreError> {
        if !self.images.contains_key(&fv.image_id) {
            return Err(StoreError::NotFound(fv.image_id));
        }
        if let Some(existing) = self.features.get(&fv.image_id) {
            return if *existing == fv { Ok(()) } else { Err(StoreError::Conflict(fv.image_id)) };
        }
        self.features.insert(fv.image_id.clone(), fv);
        Ok(())
    }

    pub fn features(&self) -> &BTreeMap<String, FeatureVector> {
        &self.features
    }

    pub fn feature(&self, id: &str) -> Option<&FeatureVector> {
        self.features.get(id)
    }

    pub fn votes(&self) -> &[Vote] {
        &self.votes
    }

    fn check_vote(&self, vote: &Vote) -> Result<(), StoreError> {
        if vote.left_id == vote.right_id {
            return Err(StoreError::InvalidVote {
                vote_id: vote.vote_id.clone(),
                reason: "an image cannot be compared with itself".into(),
            });
        }
        for id in [&vote.left_id, &vote.right_id] {
            if !self.images.contains_key(id) {
                return Err(StoreError::NotFound(id.clone()));
            }
        }
        Ok(())
    }

    /// Appends a vote to the log and updates both images' counters.
    ///
    /// Returns the counters of the left and right image after the update.
    pub fn record_vote(&mut self, vote: Vote) -> Result<(Counters, Counters), StoreError> {
        self.check_vote(&vote)?;
        for (id, d) in counters_from_votes([&vote]) {
            let c = &mut self.images.get_mut(&id).expect("checked above").counters;
            c.pos += d.pos;
            c.neg += d.neg;
            c.neu += d.neu;
        }
        let left = self.images[&vote.left_id].counters;
        let right = self.images[&vote.right_id].counters;
        self.votes.push(vote);
        Ok((left, right))
    }

    /// Zeroes every counter and replays the vote log.
    pub fn rebuild_counters(&mut self) {
        let table = counters_from_votes(&self.votes);
        for img in self.images.values_mut() {
            img.counters = table.get(&img.image_id).copied().unwrap_or_default();
        }
    }

    /// Replaces the vote log, e.g. after housekeeping, and rebuilds counters.
    pub fn replace_votes(&mut self, votes: Vec<Vote>) -> Result<(), StoreError> {
        for v in &votes {
            self.check_vote(v)?;
        }
        self.votes = votes;
        self.rebuild_counters();
        Ok(())
    }

    pub fn stats(&self) -> VoteStats {
        let mut stats = VoteStats::default();
        for code in ["0", "1", "2"] {
            stats.by_code.insert(code.to_owned(), 0);
        }
        for source in ["human", "synthetic"] {
            stats.by_source.insert(source.to_owned(), 0);
        }
        for v in &self.votes {
            *stats.by_code.get_mut(&v.code.to_string()).expect("all codes present") += 1;
            let source = match v.source {
                VoteSource::Human => "human",
                VoteSource::Synthetic => "synthetic",
            };
            *stats.by_source.get_mut(source).expect("all sources present") += 1;
        }
        stats.images = ImageStats {
            total: self.images.len() as u64,
            with_features: self.features.len() as u64,
        };
        stats
    }

    /// Checks that every vote and feature references a stored image.
    pub fn check_integrity(&self) -> Result<(), StoreError> {
        for v in &self.votes {
            for id in [&v.left_id, &v.right_id] {
                if !self.images.contains_key(id) {
                    return Err(StoreError::Integrity(format!(
                        "vote {:?} references unknown image {id:?}",
                        v.vote_id
                    )));
                }
            }
        }
        for id in self.features.keys() {
            if !self.images.contains_key(id) {
                return Err(StoreError::Integrity(format!("feature vector for unknown image {id:?}")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;
    use proptest::prelude::*;

    fn vote(id: &str, left: &str, right: &str, code: VoteCode) -> Vote {
        Vote {
            vote_id: id.into(),
            left_id: left.into(),
            right_id: right.into(),
            code,
            source: VoteSource::Human,
            session_id: format!("s-{id}"),
            timestamp: Utc.with_ymd_and_hms(2018, 6, 4, 12, 0, 0).unwrap(),
        }
    }

    fn two_images() -> Corpus {
        let mut c = Corpus::new();
        c.put_image(StreetImage::new("A", 4.65, -74.06, "chapinero")).unwrap();
        c.put_image(StreetImage::new("B", 4.66, -74.05, "chapinero")).unwrap();
        c
    }

    #[test]
    fn put_image_fresh_and_idempotent() {
        let mut c = Corpus::new();
        let img = StreetImage::new("a", 4.65, -74.06, "z");
        assert_eq!(c.put_image(img.clone()).unwrap(), "a");
        c.put_image(img).unwrap();
        assert_eq!(c.images().len(), 1);
        assert_eq!(c.image("a").unwrap().counters, Counters::default());
    }

    #[test]
    fn put_image_conflict() {
        let mut c = Corpus::new();
        c.put_image(StreetImage::new("a", 4.65, -74.06, "z")).unwrap();
        let err = c.put_image(StreetImage::new("a", 4.70, -74.06, "z")).unwrap_err();
        assert!(matches!(err, StoreError::Conflict(id) if id == "a"));
    }

    #[test]
    fn put_image_rejects_bad_records() {
        let mut c = Corpus::new();
        assert!(c.put_image(StreetImage::new("", 0.0, 0.0, "z")).is_err());
        assert!(c.put_image(StreetImage::new("x", 91.0, 0.0, "z")).is_err());
        assert!(c.put_image(StreetImage::new("x", 0.0, -181.0, "z")).is_err());
    }

    #[test]
    fn left_click_counters() {
        let mut c = two_images();
        let (a, b) = c.record_vote(vote("v1", "A", "B", VoteCode::Left)).unwrap();
        assert_eq!(a, Counters { pos: 1.0, neg: 0.0, neu: 0.0 });
        assert_eq!(b, Counters { pos: 0.0, neg: 1.0, neu: 0.0 });
    }

    #[test]
    fn right_click_counters() {
        let mut c = two_images();
        let (a, b) = c.record_vote(vote("v1", "A", "B", VoteCode::Right)).unwrap();
        assert_eq!(a.neg, 1.0);
        assert_eq!(b.pos, 1.0);
    }

    #[test]
    fn tie_counters() {
        let mut c = two_images();
        let (a, b) = c.record_vote(vote("v1", "A", "B", VoteCode::Tie)).unwrap();
        assert_eq!(a, Counters { pos: 0.0, neg: 0.0, neu: 1.0 });
        assert_eq!(b, Counters { pos: 0.0, neg: 0.0, neu: 1.0 });
    }

    #[test]
    fn self_comparison_rejected() {
        let mut c = two_images();
        let err = c.record_vote(vote("v1", "A", "A", VoteCode::Left)).unwrap_err();
        assert!(matches!(err, StoreError::InvalidVote { .. }));
        assert!(c.votes().is_empty());
    }

    #[test]
    fn unknown_image_rejected() {
        let mut c = two_images();
        let err = c.record_vote(vote("v1", "A", "zz", VoteCode::Left)).unwrap_err();
        assert!(matches!(err, StoreError::NotFound(id) if id == "zz"));
    }

    #[test]
    fn vote_code_json_is_integer() {
        let v = vote("v1", "A", "B", VoteCode::Right);
        let json = serde_json::to_value(&v).unwrap();
        assert_eq!(json["code"], 2);
        assert_eq!(json["source"], "human");
        assert_eq!(json["ts"], "2018-06-04T12:00:00Z");
        let bad = json.to_string().replace("\"code\":2", "\"code\":3");
        assert!(serde_json::from_str::<Vote>(&bad).is_err());
    }

    #[test]
    fn feature_length_checked() {
        assert!(FeatureVector::new("a", vec![0.0; 511]).is_err());
        assert!(FeatureVector::new("a", vec![0.0; FEATURE_DIM]).is_ok());
        let mut v = vec![0.0; FEATURE_DIM];
        v[7] = f32::INFINITY;
        assert!(FeatureVector::new("a", v).is_err());
    }

    #[test]
    fn stats_by_code_and_source() {
        let mut c = two_images();
        assert_eq!(c.stats().total_votes(), 0);
        assert_eq!(c.stats().by_code["0"], 0);
        for (i, code) in [VoteCode::Tie, VoteCode::Left, VoteCode::Right].into_iter().enumerate() {
            c.record_vote(vote(&format!("v{i}"), "A", "B", code)).unwrap();
        }
        let s = c.stats();
        assert_eq!((s.by_code["0"], s.by_code["1"], s.by_code["2"]), (1, 1, 1));
        assert_eq!(s.by_source["human"], 3);
        assert_eq!(s.by_source["synthetic"], 0);
        assert_eq!(s.images.total, 2);
    }

    proptest! {
        #[test]
        fn counters_conserve_and_replay(codes in prop::collection::vec((0usize..4, 0usize..4, 0u8..3), 0..200)) {
            let mut c = Corpus::new();
            for i in 0..4 {
                c.put_image(StreetImage::new(format!("i{i}"), 1.0 + i as f64 * 0.01, 2.0, "z")).unwrap();
            }
            let mut recorded = 0usize;
            for (k, (l, r, code)) in codes.into_iter().enumerate() {
                let v = vote(&format!("v{k}"), &format!("i{l}"), &format!("i{r}"), VoteCode::try_from(code).unwrap());
                if c.record_vote(v).is_ok() {
                    recorded += 1;
                }
            }
            let total: f64 = c.images().map(|i| i.counters.total()).sum();
            prop_assert_eq!(total, 2.0 * recorded as f64);

            let before: Vec<Counters> = c.images().map(|i| i.counters).collect();
            c.rebuild_counters();
            let after: Vec<Counters> = c.images().map(|i| i.counters).collect();
            prop_assert_eq!(before, after);
        }
    }
}
