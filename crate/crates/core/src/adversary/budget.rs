//! How many radio-on ticks a schedule needs before no pair of wake offsets in
//! `[0, n]` can keep two processors apart, probed over a fixed family of
//! schedule shapes rather than all schedules.

use serde::{Deserialize, Serialize};

use crate::config::Tick;
use crate::policy::{basic_policy, PolicyString};

use super::search::{search_non_overlap, OffsetWitness};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// Ones at `floor(i n / c)`; distinct while `c <= n + 1`.
    EvenlySpaced,
    /// `c` consecutive ones.
    Prefix,
    /// The first `c` ones of the `ceil(c/2)`-basic policy.
    BasicTruncation,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::EvenlySpaced, Family::Prefix, Family::BasicTruncation];

    pub fn schedule(self, n: Tick, c: usize) -> PolicyString {
        match self {
            Family::EvenlySpaced => {
                let ones: Vec<usize> = (0..c as u64).map(|i| (i * n / c as u64) as usize).collect();
                PolicyString::from_ones(ones[c - 1] + 1, &ones, 0)
            }
            Family::Prefix => PolicyString::new(vec![true; c], 0),
            Family::BasicTruncation => {
                let full = basic_policy((c as u64).div_ceil(2)).expect("c ≥ 1");
                let last = full.ones().nth(c - 1).expect("2 ceil(c/2) ≥ c ones");
                PolicyString::new(full.bits()[..=last].to_vec(), 0)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FamilyResult {
    pub family: Family,
    pub schedule: PolicyString,
    /// Offsets keeping two processors running this schedule apart.
    pub witness: Option<OffsetWitness>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BudgetRow {
    pub c: usize,
    pub results: Vec<FamilyResult>,
}

impl BudgetRow {
    /// Every shape in the family can be kept apart.
    pub fn all_defeated(&self) -> bool {
        self.results.iter().all(|r| r.witness.is_some())
    }

    pub fn safe(&self, family: Family) -> bool {
        self.results.iter().any(|r| r.family == family && r.witness.is_none())
    }
}

/// One row per budget `c` in `1..=c_max`; both processors run the same
/// schedule.
pub fn budget_curve(n: Tick, c_max: usize) -> Vec<BudgetRow> {
    (1..=c_max)
        .map(|c| BudgetRow {
            c,
            results: Family::ALL
                .iter()
                .map(|&family| {
                    let schedule = family.schedule(n, c);
                    let witness = search_non_overlap(&[schedule.clone(), schedule.clone()], n);
                    FamilyResult {
                        family,
                        schedule,
                        witness,
                    }
                })
                .collect(),
        })
        .collect()
}
