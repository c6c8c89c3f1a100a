use std::collections::{BTreeMap, BTreeSet};

use crate::store::{Counters, Vote, VoteCode};

/// Which images each image tied with.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TieGraph {
    adjacency: BTreeMap<String, BTreeSet<String>>,
}

impl TieGraph {
    /// Builds the graph from the code-0 votes in `votes`. Self-ties are ignored.
    pub fn from_votes<'a>(votes: impl IntoIterator<Item = &'a Vote>) -> Self {
        let mut g = Self::default();
        for v in votes.into_iter().filter(|v| v.code == VoteCode::Tie && v.left_id != v.right_id) {
            g.adjacency.entry(v.left_id.clone()).or_default().insert(v.right_id.clone());
            g.adjacency.entry(v.right_id.clone()).or_default().insert(v.left_id.clone());
        }
        g
    }

    pub fn neighbors(&self, id: &str) -> impl Iterator<Item = &str> {
        self.adjacency.get(id).into_iter().flatten().map(String::as_str)
    }

    pub fn is_symmetric(&self) -> bool {
        self.adjacency.iter().all(|(a, ns)| ns.iter().all(|b| self.adjacency.get(b).is_some_and(|s| s.contains(a))))
    }
}

/// Moves `own.neu` into `pos`/`neg` in the ratio `p : n`, or evenly when
/// `p + n` is zero.
pub fn redistribute_neutral(own: Counters, p: f64, n: f64) -> Counters {
    if own.neu == 0.0 {
        return own;
    }
    let share_pos = if p + n > 0.0 { p / (p + n) } else { 0.5 };
    let to_pos = own.neu * share_pos;
    Counters { pos: own.pos + to_pos, neg: own.neg + (own.neu - to_pos), neu: 0.0 }
}

/// Redistributes every image's neutral counter in one simultaneous pass.
///
/// Neighbor sums are read from `snapshot` before any update, so the result
/// does not depend on iteration order.
pub fn redistribute_all(snapshot: &BTreeMap<String, Counters>, ties: &TieGraph) -> BTreeMap<String, Counters> {
    snapshot
        .iter()
        .map(|(id, own)| {
            let (mut p, mut n) = (0.0, 0.0);
            for nb in ties.neighbors(id) {
                if let Some(c) = snapshot.get(nb) {
                    p += c.pos;
                    n += c.neg;
                }
            }
            (id.clone(), redistribute_neutral(*own, p, n))
        })
        .collect()
}
