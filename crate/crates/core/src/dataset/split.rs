use std::collections::BTreeMap;
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DatasetError, TrainingExample};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Partition {
    Train,
    Val,
    Test,
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Partition::Train => "train",
            Partition::Val => "val",
            Partition::Test => "test",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: f64,
    pub val: f64,
    pub test: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self { train: 0.65, val: 0.07, test: 0.28, seed: 0 }
    }
}

impl SplitSpec {
    fn validate(&self) -> Result<(), DatasetError> {
        let fractions = [self.train, self.val, self.test];
        if fractions.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(DatasetError::InvalidSplit(format!("fractions {fractions:?} must lie in [0, 1]")));
        }
        let sum: f64 = fractions.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(DatasetError::InvalidSplit(format!("fractions sum to {sum}, not 1")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Partitions {
    pub train: Vec<TrainingExample>,
    pub val: Vec<TrainingExample>,
    pub test: Vec<TrainingExample>,
}

impl Partitions {
    pub fn get(&self, p: Partition) -> &[TrainingExample] {
        match p {
            Partition::Train => &self.train,
            Partition::Val => &self.val,
            Partition::Test => &self.test,
        }
    }

    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.train.len(), self.val.len(), self.test.len())
    }
}

// floor(f * n), tolerant of products such as 0.29 * 100 = 28.999999999999996
fn floor_share(f: f64, n: usize) -> usize {
    (f * n as f64 + 1e-9).floor() as usize
}

/// Seeded split that keeps both examples of a vote in the same partition.
///
/// Votes are shuffled, then assigned in order to train until it holds
/// `floor(f_train * N)` examples, then to validation up to
/// `floor(f_val * N)`, and the rest go to test. With swap-doubled input the
/// first two sizes are rounded down to even counts.
pub fn split(examples: Vec<TrainingExample>, spec: &SplitSpec) -> Result<Partitions, DatasetError> {
    spec.validate()?;
    let n = examples.len();
    let mut groups: BTreeMap<String, Vec<TrainingExample>> = BTreeMap::new();
    for ex in examples {
        groups.entry(ex.origin_vote_id.clone()).or_default().push(ex);
    }
    let mut groups: Vec<Vec<TrainingExample>> = groups.into_values().collect();
    groups.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));

    let train_target = floor_share(spec.train, n);
    let val_target = floor_share(spec.val, n);
    let mut parts = Partitions::default();
    let mut groups = groups.into_iter().peekable();
    while let Some(g) = groups.next_if(|g| parts.train.len() + g.len() <= train_target) {
        parts.train.extend(g);
    }
    while let Some(g) = groups.next_if(|g| parts.val.len() + g.len() <= val_target) {
        parts.val.extend(g);
    }
    parts.test.extend(groups.flatten());

    for (p, fraction, len) in [
        (Partition::Train, spec.train, parts.train.len()),
        (Partition::Val, spec.val, parts.val.len()),
        (Partition::Test, spec.test, parts.test.len()),
    ] {
        // A partition may only come out empty when its share cannot hold one
        // swapped pair.
        if fraction > 0.0 && len == 0 && fraction * n as f64 >= 2.0 {
            return Err(DatasetError::EmptyPartition(p));
        }
    }
    let by_origin = |a: &TrainingExample, b: &TrainingExample| {
        a.origin_vote_id.cmp(&b.origin_vote_id).then(a.swapped.cmp(&b.swapped))
    };
    parts.train.sort_by(by_origin);
    parts.val.sort_by(by_origin);
    parts.test.sort_by(by_origin);
    Ok(parts)
}
