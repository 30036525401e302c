//! Per-processor protocol state machines driven by the engine.
//!
//! | protocol              | node               |
//! |-----------------------|--------------------|
//! | Synchronize           | [`SynchronizeNode`] with `ceil(log2 n)` flatten phases |
//! | Cluster-Synch alone   | [`SynchronizeNode`] with zero flatten phases |
//! | Dynamic-Synch         | [`DynamicNode`]    |
//! | naive listening       | [`NaiveNode`]      |
//! | pairwise neighbor sync| [`PairwiseNode`]   |

mod dynamic;
mod simple;
mod synchronize;

use num_rational::Rational64;
use serde::{Deserialize, Serialize};

use crate::config::{ceil_log2, Algorithm, ProcessorId, SimConfig};
use crate::engine::{Envelope, Node, ProcessorState};

pub use dynamic::{dynamic_next, DynamicNode};
pub use simple::{NaiveNode, PairwiseNode};
pub use synchronize::{flatten_wait, schedule_after_report, SynchronizeNode};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Message {
    Sync {
        id: ProcessorId,
        tau: i64,
        j: i64,
    },
    Initial {
        id: ProcessorId,
        r: u64,
        tau: i64,
        j: i64,
    },
    /// Queue position `pos` (1-based) of `dest` and the holder's main-part
    /// progress `rhat`.
    InitialResponse {
        dest: ProcessorId,
        pos: usize,
        rhat: i64,
        tau: i64,
        j: i64,
    },
    /// Queue hand-off; `seen` is every id the queue ever held.
    Pass {
        queue: Vec<ProcessorId>,
        seen: Vec<ProcessorId>,
        tau: i64,
        j: i64,
    },
    FlattenReport {
        id: ProcessorId,
        j: i64,
    },
}

impl Message {
    /// The `(tau, J)` payload, if the message carries a clock.
    pub fn clock(&self) -> Option<(i64, i64)> {
        match *self {
            Message::Sync { tau, j, .. }
            | Message::Initial { tau, j, .. }
            | Message::InitialResponse { tau, j, .. }
            | Message::Pass { tau, j, .. } => Some((tau, j)),
            Message::FlattenReport { .. } => None,
        }
    }
}

/// Early-Sync adoption step.
///
/// Takes the clock of the sender with the lexicographically largest `(J, id)`
/// when that pair beats the processor's own. Returns whether it adopted.
/// Comparing against the maximum is the same as processing the inbox one
/// message at a time in ascending id order.
///
/// With fractional offsets `J` is compared as the exact policy age at the
/// receiver's tick boundary, `J + q` for the receiver and `J + q_v + q'` for
/// a sender; with integral offsets both phases are zero.
pub fn early_sync(st: &mut ProcessorState, inbox: &[Envelope]) -> bool {
    let best = inbox
        .iter()
        .filter_map(|e| {
            let (tau, j) = e.msg.clock()?;
            Some((
                Rational64::from_integer(j) + e.sender_q + e.q_prime,
                e.sender,
                tau,
                j,
                e,
            ))
        })
        .max_by_key(|&(age, id, ..)| (age, id));
    match best {
        Some((age, id, tau, j, env)) if (Rational64::from_integer(st.j) + st.q, st.id) < (age, id) => {
            st.adopt(tau, j, env);
            true
        }
        _ => false,
    }
}

/// Start (logical time) of the next policy after a Flatten stage 2:
/// `floor(2n + tau + (len_c - ell k^2) / 2 + mu k^2)`.
pub fn flatten_next(n: u64, tau: i64, len_c: i64, ell: u64, mu: u64, k: u64) -> i64 {
    let block = (k * k) as i64;
    2 * n as i64 + tau + mu as i64 * block + (len_c - ell as i64 * block).div_euclid(2)
}

pub fn make_node(cfg: &SimConfig, k: u64) -> Box<dyn Node> {
    match cfg.algorithm {
        Algorithm::Synchronize => Box::new(SynchronizeNode::new(cfg.n, k, ceil_log2(cfg.n) as u32)),
        Algorithm::ClusterSynch => Box::new(SynchronizeNode::new(cfg.n, k, 0)),
        Algorithm::DynamicSynch => Box::new(DynamicNode::new(cfg.n, k)),
        Algorithm::Naive => Box::new(NaiveNode::new(cfg.n)),
        Algorithm::Pairwise => Box::new(PairwiseNode::new(k)),
    }
}
