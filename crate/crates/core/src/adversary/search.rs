//! Wake offsets under which fixed radio schedules never meet.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::config::Tick;
use crate::policy::PolicyString;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OffsetWitness {
    pub offsets: Vec<Tick>,
    /// Set only after an independent re-check of all on-tick sets.
    pub certified: bool,
}

/// Relative shifts `t_j - t_i` at which schedules `i` and `j` share an
/// on-tick, as a bitmap over `-n..=n`.
struct Conflicts {
    n: i64,
    bits: Vec<bool>,
}

impl Conflicts {
    fn new(a: &PolicyString, b: &PolicyString, n: Tick) -> Self {
        let n = n as i64;
        let mut bits = vec![false; (2 * n + 1) as usize];
        for x in a.ones() {
            for y in b.ones() {
                let d = x as i64 - y as i64;
                if (-n..=n).contains(&d) {
                    bits[(d + n) as usize] = true;
                }
            }
        }
        Conflicts { n, bits }
    }

    fn hit(&self, ti: Tick, tj: Tick) -> bool {
        self.bits[(tj as i64 - ti as i64 + self.n) as usize]
    }
}

/// First offset vector in `{0..=n}^m`, in lexicographic order, under which no
/// two schedules turn their radios on at the same tick.
///
/// Depth-first over processors; a partial assignment is abandoned as soon as
/// the newest offset collides with an earlier one.
pub fn search_non_overlap(schedules: &[PolicyString], n: Tick) -> Option<OffsetWitness> {
    let m = schedules.len();
    let conflicts: Vec<Vec<Option<Conflicts>>> = (0..m)
        .map(|i| {
            (0..m)
                .map(|j| (i < j).then(|| Conflicts::new(&schedules[i], &schedules[j], n)))
                .collect()
        })
        .collect();
    let mut offsets = Vec::with_capacity(m);
    if !extend(&conflicts, n, &mut offsets, m) {
        return None;
    }
    let certified = disjoint(schedules, &offsets);
    Some(OffsetWitness { offsets, certified })
}

fn extend(conflicts: &[Vec<Option<Conflicts>>], n: Tick, offsets: &mut Vec<Tick>, m: usize) -> bool {
    let j = offsets.len();
    if j == m {
        return true;
    }
    for t in 0..=n {
        let clash = offsets
            .iter()
            .enumerate()
            .any(|(i, &ti)| conflicts[i][j].as_ref().expect("i < j").hit(ti, t));
        if clash {
            continue;
        }
        offsets.push(t);
        if extend(conflicts, n, offsets, m) {
            return true;
        }
        offsets.pop();
    }
    false
}

/// Whether the shifted on-tick sets are pairwise disjoint.
pub fn disjoint(schedules: &[PolicyString], offsets: &[Tick]) -> bool {
    let sets: Vec<BTreeSet<Tick>> = schedules
        .iter()
        .zip(offsets)
        .map(|(s, &t)| s.ones().map(|o| t + o as Tick).collect())
        .collect();
    sets.iter()
        .enumerate()
        .all(|(i, a)| sets[i + 1..].iter().all(|b| a.is_disjoint(b)))
}
