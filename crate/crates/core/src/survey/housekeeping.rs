use std::collections::HashMap;

use serde::Serialize;

use super::{pair_key, DuplicateRule, PolicyConfig};
use crate::store::{Corpus, Vote};

/// Number of votes removed by each housekeeping rule.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct HousekeepReport {
    pub self_pairs: usize,
    pub near_pairs: usize,
    pub duplicates: usize,
    pub unknown_images: usize,
}

impl HousekeepReport {
    pub fn total_removed(&self) -> usize {
        self.self_pairs + self.near_pairs + self.duplicates + self.unknown_images
    }
}

/// Cleans a vote log.
///
/// Self-comparisons, votes on images missing from `corpus`, and votes on
/// pairs closer than the policy distance are removed first. Among the
/// remaining votes, repeated unordered pairs are resolved by the policy's
/// [`DuplicateRule`]; "earliest" is by timestamp, then log position. Kept
/// votes retain their log order.
pub fn housekeep(votes: &[Vote], corpus: &Corpus, policy: &PolicyConfig) -> (Vec<Vote>, HousekeepReport) {
    let mut report = HousekeepReport::default();
    let mut survivors: Vec<(usize, &Vote)> = Vec::with_capacity(votes.len());
    for (pos, v) in votes.iter().enumerate() {
        if v.left_id == v.right_id {
            report.self_pairs += 1;
            continue;
        }
        let (Some(a), Some(b)) = (corpus.image(&v.left_id), corpus.image(&v.right_id)) else {
            report.unknown_images += 1;
            continue;
        };
        if policy.too_close(a, b) {
            report.near_pairs += 1;
            continue;
        }
        survivors.push((pos, v));
    }

    let mut groups: HashMap<(String, String), Vec<(usize, &Vote)>> = HashMap::new();
    for (pos, v) in survivors {
        groups.entry(pair_key(&v.left_id, &v.right_id)).or_default().push((pos, v));
    }
    let mut kept: Vec<(usize, &Vote)> = Vec::with_capacity(groups.len());
    for (_, mut group) in groups {
        if group.len() == 1 {
            kept.push(group[0]);
            continue;
        }
        match policy.duplicate_rule {
            DuplicateRule::KeepEarliest => {
                group.sort_by(|(pa, a), (pb, b)| a.timestamp.cmp(&b.timestamp).then(pa.cmp(pb)));
                report.duplicates += group.len() - 1;
                kept.push(group[0]);
            }
            DuplicateRule::DropAll => report.duplicates += group.len(),
        }
    }
    kept.sort_by_key(|(pos, _)| *pos);
    (kept.into_iter().map(|(_, v)| v.clone()).collect(), report)
}
