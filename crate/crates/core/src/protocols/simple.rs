//! Baselines: listen for `n + 1` ticks, or run one basic policy and only
//! measure neighbor clock differences.

use crate::engine::{Ctx, Envelope, Node, PolicyKind, ProcessorState};
use crate::policy::{basic_policy, naive_policy};

use super::{early_sync, Message};

pub struct NaiveNode {
    n: u64,
}

impl NaiveNode {
    pub fn new(n: u64) -> Self {
        NaiveNode { n }
    }
}

impl Node for NaiveNode {
    fn on_wake(&mut self, st: &mut ProcessorState, _ctx: &Ctx) {
        st.j = 0;
        st.schedule(0, naive_policy(self.n).expect("n ≥ 1"), PolicyKind::Naive, 0);
    }

    fn transmit(&mut self, st: &mut ProcessorState, _ctx: &Ctx) -> Vec<Message> {
        vec![Message::Sync {
            id: st.id,
            tau: st.tau,
            j: st.j,
        }]
    }

    fn receive(&mut self, st: &mut ProcessorState, _ctx: &Ctx, subround: u8, inbox: &[Envelope]) -> Vec<Message> {
        if subround == 1 {
            early_sync(st, inbox);
        }
        Vec::new()
    }
}

/// Every processor runs one k-basic policy with `k = ceil(sqrt(n))` and only
/// learns, per neighbor, when it first heard it and their clock difference.
pub struct PairwiseNode {
    k: u64,
}

impl PairwiseNode {
    pub fn new(k: u64) -> Self {
        PairwiseNode { k }
    }
}

impl Node for PairwiseNode {
    fn on_wake(&mut self, st: &mut ProcessorState, _ctx: &Ctx) {
        st.schedule(0, basic_policy(self.k).expect("k ≥ 1"), PolicyKind::Basic, 0);
    }

    fn transmit(&mut self, st: &mut ProcessorState, _ctx: &Ctx) -> Vec<Message> {
        vec![Message::Sync {
            id: st.id,
            tau: st.tau,
            j: st.j,
        }]
    }

    /// Never adopts; the engine records first contacts and clock differences.
    fn receive(&mut self, _st: &mut ProcessorState, _ctx: &Ctx, _subround: u8, _inbox: &[Envelope]) -> Vec<Message> {
        Vec::new()
    }
}
