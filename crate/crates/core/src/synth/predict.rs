use std::collections::BTreeMap;
use std::collections::HashMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{SynthError, SyntheticPair};
use crate::dataset::NormalizationStats;
use crate::nn::{forward, Mode, ModelParams};
use crate::store::{Corpus, FeatureVector, Vote, VoteCode, VoteSource};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionConfig {
    pub margin: f64,
}

impl Default for PredictionConfig {
    fn default() -> Self {
        Self { margin: 0.25 }
    }
}

impl PredictionConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        if (0.0..1.0).contains(&self.margin) {
            Ok(())
        } else {
            Err(SynthError::InvalidMargin(self.margin))
        }
    }
}

/// Vote code for a probability pair: the more likely side when the two
/// probabilities differ by strictly more than `margin`, otherwise a tie.
pub fn code_from_probs(probs: [f64; 2], margin: f64) -> VoteCode {
    if (probs[0] - probs[1]).abs() > margin {
        if probs[0] > probs[1] {
            VoteCode::Left
        } else {
            VoteCode::Right
        }
    } else {
        VoteCode::Tie
    }
}

/// Anything that can estimate (P(left safer), P(right safer)) for a pair.
pub trait PairScorer: Sync {
    fn probs(&self, left_id: &str, right_id: &str) -> Result<[f64; 2], SynthError>;
}

/// Scores pairs with a trained network over normalized features.
pub struct ModelScorer<'a> {
    params: &'a ModelParams,
    normalized: HashMap<&'a str, Vec<f32>>,
}

impl<'a> ModelScorer<'a> {
    /// Normalizes every feature vector once up front.
    pub fn new(params: &'a ModelParams, stats: &NormalizationStats, features: &'a BTreeMap<String, FeatureVector>) -> Self {
        let normalized = features
            .iter()
            .map(|(id, fv)| (id.as_str(), stats.normalize(fv.values()).into_iter().map(|v| v as f32).collect()))
            .collect();
        Self { params, normalized }
    }
}

impl PairScorer for ModelScorer<'_> {
    fn probs(&self, left_id: &str, right_id: &str) -> Result<[f64; 2], SynthError> {
        let lookup = |id: &str| self.normalized.get(id).ok_or_else(|| SynthError::MissingFeature(id.to_owned()));
        let (l, r) = (lookup(left_id)?, lookup(right_id)?);
        let mut x = Vec::with_capacity(l.len() + r.len());
        x.extend_from_slice(l);
        x.extend_from_slice(r);
        Ok(forward(self.params, &x, Mode::Eval)?.0)
    }
}

/// Labels each pair with the scorer's judgment and returns the votes in
/// pair order. Work is spread over `threads` threads; output does not
/// depend on the thread count.
pub fn predict_pairs<S: PairScorer>(
    zone: &str,
    pairs: &[SyntheticPair],
    scorer: &S,
    config: &PredictionConfig,
    timestamp: DateTime<Utc>,
    threads: usize,
) -> Result<Vec<Vote>, SynthError> {
    config.validate()?;
    let threads = threads.max(1);
    let chunk = pairs.len().div_ceil(threads).max(1);
    let codes: Vec<Result<Vec<VoteCode>, SynthError>> = std::thread::scope(|s| {
        let handles: Vec<_> = pairs
            .chunks(chunk)
            .map(|part| {
                s.spawn(move || {
                    part.iter()
                        .map(|p| Ok(code_from_probs(scorer.probs(&p.left_id, &p.right_id)?, config.margin)))
                        .collect()
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("scorer thread panicked")).collect()
    });
    let mut votes = Vec::with_capacity(pairs.len());
    for (k, code) in codes.into_iter().collect::<Result<Vec<_>, _>>()?.into_iter().flatten().enumerate() {
        let p = &pairs[k];
        votes.push(Vote {
            vote_id: format!("syn-{zone}-{k:06}"),
            left_id: p.left_id.clone(),
            right_id: p.right_id.clone(),
            code,
            source: VoteSource::Synthetic,
            session_id: format!("syn-{zone}"),
            timestamp,
        });
    }
    Ok(votes)
}

/// Records synthetic votes in pair order, updating counters like human votes.
pub fn record_synthetic(corpus: &mut Corpus, votes: Vec<Vote>) -> Result<(), SynthError> {
    for v in votes {
        corpus.record_vote(v)?;
    }
    Ok(())
}
