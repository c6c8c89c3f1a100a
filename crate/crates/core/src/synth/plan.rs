use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::hilbert::hilbert_sort;
use super::SynthError;
use crate::store::StreetImage;

pub const SUBGROUPS: usize = 10;
pub const MIN_ZONE_IMAGES: usize = 2 * SUBGROUPS;

/// An ordered pair to be judged; `left_id` is the primary image.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticPair {
    pub left_id: String,
    pub right_id: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticPairPlan {
    pub zone: String,
    pub group_a: Vec<String>,
    pub group_b: Vec<String>,
    pub subgroups_a: Vec<Vec<String>>,
    pub subgroups_b: Vec<Vec<String>>,
    pub seed: u64,
}

impl SyntheticPairPlan {
    /// Number of pairs this plan produces.
    pub fn pair_count(&self) -> usize {
        SUBGROUPS * (self.group_a.len() + self.group_b.len())
    }
}

/// Expected pair count for `n` zone images.
pub fn expected_pairs(n: usize) -> usize {
    SUBGROUPS * 2 * (n / 2)
}

// Contiguous runs; the first `len % parts` runs get one extra element.
fn chunk_evenly(items: &[String], parts: usize) -> Vec<Vec<String>> {
    let (base, extra) = (items.len() / parts, items.len() % parts);
    let mut out = Vec::with_capacity(parts);
    let mut start = 0;
    for k in 0..parts {
        let len = base + usize::from(k < extra);
        out.push(items[start..start + len].to_vec());
        start += len;
    }
    out
}

/// Splits a zone into two spatially interleaved groups and pairs every
/// image with one random member of each of the other group's subgroups.
///
/// Images are put in Hilbert order and dealt alternately to groups A and
/// B; an odd image out (the last in curve order) is left unpaired.
/// Pairs are listed group A primaries first, each primary's ten pairs in
/// subgroup order.
pub fn plan_pairs(zone: &str, images: &[StreetImage], seed: u64) -> Result<(SyntheticPairPlan, Vec<SyntheticPair>), SynthError> {
    let mut ordered: Vec<&StreetImage> = images.iter().filter(|i| i.zone == zone).collect();
    if ordered.len() < MIN_ZONE_IMAGES {
        return Err(SynthError::TooFewImages { zone: zone.to_owned(), found: ordered.len(), needed: MIN_ZONE_IMAGES });
    }
    hilbert_sort(&mut ordered);
    let m = ordered.len() / 2;
    let group_a: Vec<String> = ordered.iter().step_by(2).take(m).map(|i| i.image_id.clone()).collect();
    let group_b: Vec<String> = ordered.iter().skip(1).step_by(2).take(m).map(|i| i.image_id.clone()).collect();
    let subgroups_a = chunk_evenly(&group_a, SUBGROUPS);
    let subgroups_b = chunk_evenly(&group_b, SUBGROUPS);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::with_capacity(2 * m * SUBGROUPS);
    for (primaries, others) in [(&group_a, &subgroups_b), (&group_b, &subgroups_a)] {
        for primary in primaries {
            for sub in others {
                let partner = &sub[rng.gen_range(0..sub.len())];
                pairs.push(SyntheticPair { left_id: primary.clone(), right_id: partner.clone() });
            }
        }
    }
    let plan = SyntheticPairPlan { zone: zone.to_owned(), group_a, group_b, subgroups_a, subgroups_b, seed };
    Ok((plan, pairs))
}
