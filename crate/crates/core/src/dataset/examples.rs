use std::collections::{BTreeMap, HashMap};

use super::{DatasetError, NormalizationStats};
use crate::store::{FeatureVector, Vote, VoteCode};
use crate::PAIR_DIM;

/// One supervised pair: normalized left features followed by normalized
/// right features, labelled with the charged vote code.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingExample {
    pub x: Vec<f32>,
    pub label: VoteCode,
    pub origin_vote_id: String,
    pub swapped: bool,
}

impl TrainingExample {
    /// Class index used by the network: code 1 is class 0, code 2 class 1.
    pub fn class(&self) -> usize {
        match self.label {
            VoteCode::Left => 0,
            VoteCode::Right => 1,
            VoteCode::Tie => unreachable!("ties never become examples"),
        }
    }

    /// The same judgment with the two images exchanged.
    pub fn mirrored(&self) -> Self {
        let half = self.x.len() / 2;
        let mut x = Vec::with_capacity(self.x.len());
        x.extend_from_slice(&self.x[half..]);
        x.extend_from_slice(&self.x[..half]);
        Self { x, label: self.label.swapped(), origin_vote_id: self.origin_vote_id.clone(), swapped: !self.swapped }
    }
}

/// Builds examples from charged votes and doubles them by position swap.
///
/// Ties are dropped. Output is sorted by (origin vote id, swapped).
pub fn build_examples(
    votes: &[Vote],
    features: &BTreeMap<String, FeatureVector>,
    stats: &NormalizationStats,
) -> Result<Vec<TrainingExample>, DatasetError> {
    let mut normalized: HashMap<&str, Vec<f32>> = HashMap::new();
    let mut out = Vec::with_capacity(2 * votes.len());
    for vote in votes.iter().filter(|v| v.code.is_charged()) {
        for id in [&vote.left_id, &vote.right_id] {
            if normalized.contains_key(id.as_str()) {
                continue;
            }
            let fv = features.get(id).ok_or_else(|| DatasetError::MissingFeature {
                vote_id: vote.vote_id.clone(),
                image_id: id.clone(),
            })?;
            let v = stats.normalize(fv.values()).into_iter().map(|x| x as f32).collect();
            normalized.insert(fv.image_id(), v);
        }
        let mut x = Vec::with_capacity(PAIR_DIM);
        x.extend_from_slice(&normalized[vote.left_id.as_str()]);
        x.extend_from_slice(&normalized[vote.right_id.as_str()]);
        let example = TrainingExample { x, label: vote.code, origin_vote_id: vote.vote_id.clone(), swapped: false };
        out.push(example.mirrored());
        out.push(example);
    }
    out.sort_by(|a, b| a.origin_vote_id.cmp(&b.origin_vote_id).then(a.swapped.cmp(&b.swapped)));
    Ok(out)
}
