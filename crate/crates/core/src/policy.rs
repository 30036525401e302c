//! Radio-use policies: bit strings whose ones are the ticks a processor keeps
//! its radio on, relative to the tick the policy starts.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::Tick;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PolicyError {
    #[error("policy parameter k must be ≥ 1")]
    ZeroK,
    #[error("n must be ≥ 1")]
    ZeroWindow,
    #[error("policy has no 1-bits")]
    AllZero,
}

/// A bit string split into an initial part `s[..initial_len]` and a main part.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "PolicyRepr", try_from = "PolicyRepr")]
pub struct PolicyString {
    bits: Vec<bool>,
    initial_len: usize,
}

impl PolicyString {
    pub fn new(bits: Vec<bool>, initial_len: usize) -> Self {
        assert!(initial_len <= bits.len());
        PolicyString { bits, initial_len }
    }

    /// Parse a string of `0`/`1` characters; any other character is rejected.
    pub fn parse(s: &str, initial_len: usize) -> Option<Self> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Some(false),
                '1' => Some(true),
                _ => None,
            })
            .collect::<Option<Vec<_>>>()?;
        (initial_len <= bits.len()).then(|| PolicyString::new(bits, initial_len))
    }

    /// A policy of `len` zeros with ones exactly at `ones`.
    pub fn from_ones(len: usize, ones: &[usize], initial_len: usize) -> Self {
        let mut bits = vec![false; len];
        for &i in ones {
            bits[i] = true;
        }
        PolicyString::new(bits, initial_len)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    /// `|s|`, the raw string length.
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn initial_len(&self) -> usize {
        self.initial_len
    }

    pub fn bit(&self, offset: u64) -> bool {
        usize::try_from(offset)
            .ok()
            .and_then(|i| self.bits.get(i).copied())
            .unwrap_or(false)
    }

    /// Offsets of all 1-bits in increasing order.
    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().filter_map(|(i, &b)| b.then_some(i))
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn first_one(&self) -> Option<usize> {
        self.bits.iter().position(|&b| b)
    }

    pub fn last_one(&self) -> Option<usize> {
        self.bits.iter().rposition(|&b| b)
    }
}

/// Compact serialized form: the bits as a `0`/`1` string.
#[derive(Serialize, Deserialize)]
struct PolicyRepr {
    bits: String,
    initial_len: usize,
}

impl From<PolicyString> for PolicyRepr {
    fn from(p: PolicyString) -> Self {
        PolicyRepr {
            bits: p.to_string(),
            initial_len: p.initial_len,
        }
    }
}

impl TryFrom<PolicyRepr> for PolicyString {
    type Error = String;

    fn try_from(r: PolicyRepr) -> Result<Self, Self::Error> {
        PolicyString::parse(&r.bits, r.initial_len).ok_or_else(|| format!("invalid policy {:?}", r.bits))
    }
}

impl fmt::Display for PolicyString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for PolicyString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PolicyString({self}, initial_len={})", self.initial_len)
    }
}

/// The k-basic policy: `k` consecutive ones, then one on every `k`-th tick
/// ending at index `(i + 2) k - 1` for `i < k`. Length `k^2 + k`.
pub fn basic_policy(k: u64) -> Result<PolicyString, PolicyError> {
    if k == 0 {
        return Err(PolicyError::ZeroK);
    }
    let k = k as usize;
    let mut bits = vec![false; k * k + k];
    for i in 0..k {
        bits[i] = true;
        bits[(i + 2) * k - 1] = true;
    }
    Ok(PolicyString::new(bits, k))
}

/// The main part of the k-basic policy on its own: `k^2` ticks with ones at
/// `k i - 1` for `i = 1..=k`.
pub fn basic_main_part(k: u64) -> Result<PolicyString, PolicyError> {
    if k == 0 {
        return Err(PolicyError::ZeroK);
    }
    let k = k as usize;
    let ones: Vec<usize> = (1..=k).map(|i| k * i - 1).collect();
    Ok(PolicyString::from_ones(k * k, &ones, 0))
}

/// Listen for `n + 1` consecutive ticks.
pub fn naive_policy(n: u64) -> Result<PolicyString, PolicyError> {
    if n == 0 {
        return Err(PolicyError::ZeroWindow);
    }
    let len = n as usize + 1;
    Ok(PolicyString::new(vec![true; len], len))
}

/// Distance between the first and last one, plus one.
pub fn policy_len(p: &PolicyString) -> Result<u64, PolicyError> {
    match (p.first_one(), p.last_one()) {
        (Some(a), Some(b)) => Ok((b - a + 1) as u64),
        _ => Err(PolicyError::AllZero),
    }
}

pub fn on_ticks(p: &PolicyString, start: Tick) -> BTreeSet<Tick> {
    p.ones().map(|j| start + j as Tick).collect()
}

/// Whether two policies started at the given global ticks share an on-tick.
pub fn overlaps(p: &PolicyString, off_a: Tick, q: &PolicyString, off_b: Tick) -> bool {
    first_overlap(p, off_a, q, off_b).is_some()
}

/// Earliest global tick at which both policies are on.
pub fn first_overlap(p: &PolicyString, off_a: Tick, q: &PolicyString, off_b: Tick) -> Option<Tick> {
    let lo = off_a.max(off_b);
    let hi = (off_a + p.len() as Tick).min(off_b + q.len() as Tick);
    (lo..hi).find(|&t| p.bit(t - off_a) && q.bit(t - off_b))
}
