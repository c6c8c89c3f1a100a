//! Pair serving for the visual survey, vote coding and log housekeeping.
//!
//! Serving rules:
//!
//! - an image is never compared with itself;
//! - an unordered pair is served at most once, whether voted or still open;
//! - images closer than `min_pair_distance_m` are never paired;
//! - the least-served images are always served first, which keeps every
//!   image's share of comparisons within a small spread.

mod housekeeping;

use std::collections::{BTreeMap, BTreeSet, HashSet};

use chrono::{DateTime, Duration, Utc};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::haversine_m;
use crate::store::{Corpus, StoreError, StreetImage, Vote, VoteCode, VoteSource};

pub use housekeeping::{housekeep, HousekeepReport};

#[derive(Debug, Error)]
pub enum SurveyError {
    #[error("no eligible image pair remains")]
    Exhausted,
    #[error("unknown session {0:?}")]
    UnknownSession(String),
    #[error("session {0:?} has expired")]
    Expired(String),
    #[error("session {0:?} was already voted")]
    AlreadyVoted(String),
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// What to do when the same unordered pair was voted more than once.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DuplicateRule {
    /// Keep the earliest vote on the pair.
    #[default]
    KeepEarliest,
    /// Drop every vote on the pair.
    DropAll,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyConfig {
    pub min_pair_distance_m: f64,
    pub session_ttl_s: i64,
    pub max_participation_spread: u32,
    #[serde(default)]
    pub duplicate_rule: DuplicateRule,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            min_pair_distance_m: 25.0,
            session_ttl_s: 600,
            max_participation_spread: 2,
            duplicate_rule: DuplicateRule::KeepEarliest,
        }
    }
}

impl PolicyConfig {
    pub fn validate(&self) -> Result<(), SurveyError> {
        if !(self.min_pair_distance_m.is_finite() && self.min_pair_distance_m > 0.0) {
            return Err(SurveyError::InvalidPolicy("min_pair_distance_m must be positive".into()));
        }
        if self.session_ttl_s <= 0 {
            return Err(SurveyError::InvalidPolicy("session_ttl_s must be positive".into()));
        }
        if self.max_participation_spread == 0 {
            return Err(SurveyError::InvalidPolicy("max_participation_spread must be positive".into()));
        }
        Ok(())
    }

    pub(crate) fn too_close(&self, a: &StreetImage, b: &StreetImage) -> bool {
        haversine_m(a.lat, a.lon, b.lat, b.lon) < self.min_pair_distance_m
    }
}

/// Which control the voter clicked.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Click {
    Left,
    Equal,
    Right,
}

impl Click {
    pub fn code(self) -> VoteCode {
        match self {
            Click::Left => VoteCode::Left,
            Click::Equal => VoteCode::Tie,
            Click::Right => VoteCode::Right,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairSession {
    pub session_id: String,
    pub left_id: String,
    pub right_id: String,
    pub issued_at: DateTime<Utc>,
    pub expires_at: DateTime<Utc>,
}

pub fn pair_key(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_owned(), b.to_owned())
    } else {
        (b.to_owned(), a.to_owned())
    }
}

/// Stateful pair server. All mutation goes through `&mut self`, so callers
/// that share an engine serialize access behind one lock.
#[derive(Debug)]
pub struct SurveyEngine {
    policy: PolicyConfig,
    zone: Option<String>,
    rng: ChaCha8Rng,
    open: BTreeMap<String, PairSession>,
    expired: BTreeSet<String>,
    consumed: BTreeSet<String>,
    /// Pairs that were voted or are held by an open session.
    taken: HashSet<(String, String)>,
    /// Voted plus open sessions per image.
    participation: BTreeMap<String, u32>,
}

impl SurveyEngine {
    /// Creates an engine primed with the human votes already in `corpus`.
    pub fn new(corpus: &Corpus, policy: PolicyConfig, seed: u64) -> Result<Self, SurveyError> {
        policy.validate()?;
        let mut engine = Self {
            policy,
            zone: None,
            rng: ChaCha8Rng::seed_from_u64(seed),
            open: BTreeMap::new(),
            expired: BTreeSet::new(),
            consumed: BTreeSet::new(),
            taken: HashSet::new(),
            participation: BTreeMap::new(),
        };
        for v in corpus.votes().iter().filter(|v| v.source == VoteSource::Human) {
            engine.taken.insert(pair_key(&v.left_id, &v.right_id));
            *engine.participation.entry(v.left_id.clone()).or_default() += 1;
            *engine.participation.entry(v.right_id.clone()).or_default() += 1;
            engine.consumed.insert(v.session_id.clone());
        }
        Ok(engine)
    }

    /// Serves only images of `zone`.
    pub fn restrict_to_zone(mut self, zone: impl Into<String>) -> Self {
        self.zone = Some(zone.into());
        self
    }

    pub fn policy(&self) -> &PolicyConfig {
        &self.policy
    }

    pub fn participation(&self, image_id: &str) -> u32 {
        self.participation.get(image_id).copied().unwrap_or(0)
    }

    pub fn open_sessions(&self) -> impl Iterator<Item = &PairSession> {
        self.open.values()
    }

    /// Expires every open session whose deadline has passed, releasing its
    /// pair for reissue.
    pub fn reap_expired(&mut self, now: DateTime<Utc>) {
        let stale: Vec<String> =
            self.open.values().filter(|s| s.expires_at <= now).map(|s| s.session_id.clone()).collect();
        for id in stale {
            let s = self.open.remove(&id).expect("listed above");
            self.taken.remove(&pair_key(&s.left_id, &s.right_id));
            for img in [&s.left_id, &s.right_id] {
                if let Some(p) = self.participation.get_mut(img) {
                    *p -= 1;
                }
            }
            self.expired.insert(id);
        }
    }

    /// Issues a new session for the least-served eligible pair.
    ///
    /// Images are ranked by participation with seeded random tie-breaking;
    /// the first image that still has an eligible partner is paired with its
    /// least-served eligible partner. Left/right placement is randomized.
    pub fn next_pair(&mut self, corpus: &Corpus, now: DateTime<Utc>) -> Result<PairSession, SurveyError> {
        self.reap_expired(now);
        let mut candidates: Vec<&StreetImage> = corpus
            .images()
            .filter(|img| self.zone.as_ref().is_none_or(|z| *z == img.zone))
            .collect();
        candidates.shuffle(&mut self.rng);
        candidates.sort_by_key(|img| self.participation(&img.image_id));

        let mut chosen = None;
        'outer: for (i, a) in candidates.iter().enumerate() {
            for (j, b) in candidates.iter().enumerate() {
                if i == j || self.taken.contains(&pair_key(&a.image_id, &b.image_id)) {
                    continue;
                }
                if !self.policy.too_close(a, b) {
                    chosen = Some((*a, *b));
                    break 'outer;
                }
            }
        }
        let (a, b) = chosen.ok_or(SurveyError::Exhausted)?;
        let (left, right) = if self.rng.gen_bool(0.5) { (a, b) } else { (b, a) };

        let session_id = loop {
            let id = format!("{:016x}", self.rng.gen::<u64>());
            if !(self.open.contains_key(&id) || self.expired.contains(&id) || self.consumed.contains(&id)) {
                break id;
            }
        };
        let session = PairSession {
            session_id,
            left_id: left.image_id.clone(),
            right_id: right.image_id.clone(),
            issued_at: now,
            expires_at: now + Duration::seconds(self.policy.session_ttl_s),
        };
        self.taken.insert(pair_key(&session.left_id, &session.right_id));
        for img in [&session.left_id, &session.right_id] {
            *self.participation.entry(img.clone()).or_default() += 1;
        }
        self.open.insert(session.session_id.clone(), session.clone());
        Ok(session)
    }

    /// Builds the vote a click would produce without consuming the session.
    ///
    /// Lets callers persist the vote before [`SurveyEngine::commit_vote`].
    pub fn prepare_vote(&mut self, session_id: &str, click: Click, now: DateTime<Utc>) -> Result<Vote, SurveyError> {
        if self.consumed.contains(session_id) {
            return Err(SurveyError::AlreadyVoted(session_id.to_owned()));
        }
        if self.expired.contains(session_id) {
            return Err(SurveyError::Expired(session_id.to_owned()));
        }
        let session = self
            .open
            .get(session_id)
            .ok_or_else(|| SurveyError::UnknownSession(session_id.to_owned()))?;
        if session.expires_at <= now {
            self.reap_expired(now);
            return Err(SurveyError::Expired(session_id.to_owned()));
        }
        Ok(Vote {
            vote_id: format!("v-{session_id}"),
            left_id: session.left_id.clone(),
            right_id: session.right_id.clone(),
            code: click.code(),
            source: VoteSource::Human,
            session_id: session_id.to_owned(),
            timestamp: now,
        })
    }

    /// Records a prepared vote in the corpus and consumes its session.
    pub fn commit_vote(&mut self, corpus: &mut Corpus, vote: Vote) -> Result<(), SurveyError> {
        let session = self
            .open
            .get(&vote.session_id)
            .ok_or_else(|| SurveyError::UnknownSession(vote.session_id.clone()))?;
        debug_assert_eq!((&session.left_id, &session.right_id), (&vote.left_id, &vote.right_id));
        let id = vote.session_id.clone();
        corpus.record_vote(vote)?;
        self.open.remove(&id);
        self.consumed.insert(id);
        Ok(())
    }

    pub fn submit_vote(
        &mut self,
        corpus: &mut Corpus,
        session_id: &str,
        click: Click,
        now: DateTime<Utc>,
    ) -> Result<Vote, SurveyError> {
        let vote = self.prepare_vote(session_id, click, now)?;
        self.commit_vote(corpus, vote.clone())?;
        Ok(vote)
    }
}
