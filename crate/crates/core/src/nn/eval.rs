use serde::{Deserialize, Serialize};

use super::{forward, Mode, ModelParams, NnError};
use crate::dataset::TrainingExample;
use crate::store::VoteCode;

/// Counts indexed `[true][predicted]`, index 0 for code 1 and 1 for code 2.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; 2]; 2],
}

fn index(code: VoteCode) -> usize {
    match code {
        VoteCode::Left => 0,
        VoteCode::Right => 1,
        VoteCode::Tie => panic!("tie votes are not classified"),
    }
}

impl ConfusionMatrix {
    pub fn from_counts(counts: [[u64; 2]; 2]) -> Self {
        Self { counts }
    }

    pub fn record(&mut self, truth: VoteCode, predicted: VoteCode) {
        self.counts[index(truth)][index(predicted)] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> u64 {
        self.counts[0][0] + self.counts[1][1]
    }

    /// Row sums: examples per true code.
    pub fn true_totals(&self) -> [u64; 2] {
        [self.counts[0][0] + self.counts[0][1], self.counts[1][0] + self.counts[1][1]]
    }

    /// Column sums: examples per predicted code.
    pub fn predicted_totals(&self) -> [u64; 2] {
        [self.counts[0][0] + self.counts[1][0], self.counts[0][1] + self.counts[1][1]]
    }

    /// Trace over total; `None` when empty.
    pub fn accuracy(&self) -> Option<f64> {
        match self.total() {
            0 => None,
            n => Some(self.correct() as f64 / n as f64),
        }
    }
}

impl std::fmt::Display for ConfusionMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let [[a, b], [c, d]] = self.counts;
        writeln!(f, "true\\pred        1        2")?;
        writeln!(f, "1        {a:>9} {b:>8}")?;
        write!(f, "2        {c:>9} {d:>8}")
    }
}

/// Eval-mode prediction: the argmax class as a vote code, with probabilities.
/// Exact ties go to code 1.
pub fn predict(params: &ModelParams, x: &[f32]) -> Result<(VoteCode, [f64; 2]), NnError> {
    let (probs, _) = forward(params, x, Mode::Eval)?;
    let code = if probs[1] > probs[0] { VoteCode::Right } else { VoteCode::Left };
    Ok((code, probs))
}

/// Builds a confusion matrix from labelled predictions.
pub fn tally<I>(pairs: I) -> ConfusionMatrix
where
    I: IntoIterator<Item = (VoteCode, VoteCode)>,
{
    let mut m = ConfusionMatrix::default();
    for (truth, predicted) in pairs {
        m.record(truth, predicted);
    }
    m
}

pub fn evaluate(params: &ModelParams, examples: &[TrainingExample]) -> Result<(ConfusionMatrix, f64), NnError> {
    if examples.is_empty() {
        return Err(NnError::EmptyPartition("evaluation"));
    }
    let mut m = ConfusionMatrix::default();
    for ex in examples {
        m.record(ex.label, predict(params, &ex.x)?.0);
    }
    let acc = m.accuracy().expect("non-empty");
    Ok((m, acc))
}

/// Share of swapped twin pairs whose two predictions are mirror images
/// (one says code 1, the other code 2). Examples without their twin in
/// `examples` are ignored; `None` if no twin pairs are present.
pub fn swap_consistency_rate(params: &ModelParams, examples: &[TrainingExample]) -> Result<Option<f64>, NnError> {
    use std::collections::BTreeMap;
    let mut twins: BTreeMap<&str, [Option<&TrainingExample>; 2]> = BTreeMap::new();
    for ex in examples {
        twins.entry(ex.origin_vote_id.as_str()).or_default()[usize::from(ex.swapped)] = Some(ex);
    }
    let (mut pairs, mut consistent) = (0u64, 0u64);
    for slot in twins.values() {
        if let [Some(a), Some(b)] = slot {
            pairs += 1;
            if predict(params, &a.x)?.0 != predict(params, &b.x)?.0 {
                consistent += 1;
            }
        }
    }
    Ok((pairs > 0).then(|| consistent as f64 / pairs as f64))
}
