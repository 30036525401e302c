//! Dynamic-Synch: one scheduling pass right after wake-up that queues every
//! processor's main part behind the current temporary leader, plus one
//! independent basic policy `2n` ticks after wake-up.
//!
//! Rounds are counted from wake-up starting at 1, so round `r` is local tick
//! `r - 1`. The main part scheduled for round offset `next` is the policy
//! with ones at `k i - 1` started at local tick `next`, which puts its radio
//! ticks on rounds `next + k, next + 2k, ..., next + k^2`.

use std::collections::{BTreeSet, VecDeque};

use crate::config::ProcessorId;
use crate::engine::{Ctx, Envelope, Node, PolicyKind, ProcessorState};
use crate::policy::{basic_main_part, basic_policy, PolicyString};

use super::{early_sync, Message};

/// Round offset of the main part: `k` for a new leader, otherwise
/// `(ell - 1) k^2 - dif` where `ell` is the queue position and `dif` the
/// leader's progress minus the processor's own round.
pub fn dynamic_next(k: u64, leader: bool, ell: usize, dif: i64) -> i64 {
    if leader {
        k as i64
    } else {
        (ell as i64 - 1) * (k * k) as i64 - dif
    }
}

pub struct DynamicNode {
    n: u64,
    k: u64,
    candidate: bool,
    winner: bool,
    q: VecDeque<ProcessorId>,
    seen: BTreeSet<ProcessorId>,
    next: Option<i64>,
    leader: bool,
    holder: bool,
}

impl DynamicNode {
    pub fn new(n: u64, k: u64) -> Self {
        DynamicNode {
            n,
            k,
            candidate: true,
            winner: true,
            q: VecDeque::new(),
            seen: BTreeSet::new(),
            next: None,
            leader: false,
            holder: false,
        }
    }

    fn enqueue(&mut self, id: ProcessorId) {
        if self.seen.insert(id) {
            self.q.push_back(id);
        }
    }

    fn responses(&self, st: &ProcessorState, rhat: i64) -> Vec<Message> {
        self.q
            .iter()
            .enumerate()
            .map(|(j, &dest)| Message::InitialResponse {
                dest,
                pos: j + 1,
                rhat,
                tau: st.tau,
                j: st.j,
            })
            .collect()
    }

    fn flatten(&mut self, st: &mut ProcessorState, round: u64, leader: bool, ell: usize, dif: i64) {
        let k = self.k;
        let next = dynamic_next(k, leader, ell, dif);
        if next < round as i64 {
            st.flag(format!("main part scheduled before round {round} (next = {next})"));
            return;
        }
        self.next = Some(next);
        self.leader = leader;
        self.holder = leader;
        let next = next as u64;
        st.schedule(next, basic_main_part(k).expect("k ≥ 1"), PolicyKind::DynMain, 0);
        // Hand-off: begins on the last main-part tick so the holder stays in
        // progress until it passes the queue, k - 1 ticks into the next main
        // part. No main part of its own.
        let mut pass = vec![false; k as usize + 1];
        pass[k as usize] = true;
        let len = pass.len();
        st.schedule(next + k * k - 1, PolicyString::new(pass, len), PolicyKind::DynPass, 0);
    }

    /// Responses addressed to this processor while it is still a candidate.
    fn take_response(&mut self, st: &mut ProcessorState, round: u64, inbox: &[Envelope]) {
        if !self.candidate || self.next.is_some() {
            return;
        }
        let hit = inbox.iter().find_map(|e| match e.msg {
            Message::InitialResponse { dest, pos, rhat, .. } if dest == st.id => Some((pos, rhat)),
            _ => None,
        });
        if let Some((pos, rhat)) = hit {
            self.candidate = false;
            self.flatten(st, round, false, pos, rhat - round as i64);
        }
    }
}

impl Node for DynamicNode {
    fn on_wake(&mut self, st: &mut ProcessorState, _ctx: &Ctx) {
        self.q.push_back(st.id);
        self.seen.insert(st.id);
        let k = self.k as usize;
        st.schedule(0, PolicyString::new(vec![true; k], k), PolicyKind::DynInitial, 0);
        st.schedule(2 * self.n, basic_policy(self.k).expect("k ≥ 1"), PolicyKind::Basic, 1);
    }

    fn transmit(&mut self, st: &mut ProcessorState, ctx: &Ctx) -> Vec<Message> {
        let mut out = Vec::new();
        let round = ctx.local + 1;
        if ctx.on_with(PolicyKind::DynInitial).is_some() {
            out.push(Message::Initial {
                id: st.id,
                r: round,
                tau: st.tau,
                j: st.j,
            });
        }
        if ctx.on_with(PolicyKind::Basic).is_some() {
            out.push(Message::Sync {
                id: st.id,
                tau: st.tau,
                j: st.j,
            });
        }
        if ctx.on_with(PolicyKind::DynPass).is_some() {
            if self.q.front() == Some(&st.id) {
                self.q.pop_front();
            } else {
                st.flag("pass by a processor not at the head of its queue");
            }
            self.holder = false;
            out.push(Message::Pass {
                queue: self.q.iter().copied().collect(),
                seen: self.seen.iter().copied().collect(),
                tau: st.tau,
                j: st.j,
            });
        }
        out
    }

    fn receive(&mut self, st: &mut ProcessorState, ctx: &Ctx, subround: u8, inbox: &[Envelope]) -> Vec<Message> {
        early_sync(st, inbox);
        let round = ctx.local + 1;
        let initial = ctx.on_with(PolicyKind::DynInitial).is_some();
        let mut out = Vec::new();
        match subround {
            1 => {
                if let Some(a) = ctx.on_with(PolicyKind::DynMain) {
                    let next = self.next.expect("main part implies a schedule");
                    if a.offset + 1 == self.k && !self.leader {
                        let pass = inbox.iter().find_map(|e| match &e.msg {
                            Message::Pass { queue, seen, .. } => Some((queue.clone(), seen.clone())),
                            _ => None,
                        });
                        match pass {
                            Some((queue, seen)) => {
                                self.q = queue.into_iter().collect();
                                self.seen = seen.into_iter().collect();
                            }
                            None => st.flag("expected queue hand-off missing"),
                        }
                        self.holder = true;
                    }
                    for e in inbox {
                        if let Message::Initial { id, .. } = e.msg {
                            self.enqueue(id);
                        }
                    }
                    out = self.responses(st, round as i64 - next);
                }
                if initial {
                    for e in inbox {
                        if let Message::Initial { id, r, .. } = e.msg {
                            if round == 1 && (r > 1 || (r == 1 && id > st.id)) {
                                self.winner = false;
                            }
                            self.enqueue(id);
                        }
                    }
                }
            }
            2 => {
                if initial {
                    self.take_response(st, round, inbox);
                    if round == self.k && self.candidate && self.winner && self.next.is_none() {
                        out = self.responses(st, 0);
                        self.flatten(st, round, true, 0, 0);
                    }
                }
            }
            _ => {
                if initial {
                    self.take_response(st, round, inbox);
                }
            }
        }
        out
    }

    fn end_tick(&mut self, st: &mut ProcessorState, ctx: &Ctx) {
        let starts = ctx.on_with(PolicyKind::Basic).is_some_and(|a| a.starts());
        if starts && self.next.is_none() {
            st.flag("no main part scheduled by the independent run");
        }
    }

    fn queue_len(&self) -> Option<usize> {
        self.holder.then_some(self.q.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{Algorithm, SimConfig};
    use crate::engine::run;

    fn rounds_on(trace: &crate::engine::SimTrace, pid: u32, kind: PolicyKind) -> Vec<u64> {
        let wake = trace.wakes()[pid as usize - 1];
        trace
            .policies_of(ProcessorId(pid))
            .filter(|p| p.kind == kind)
            .flat_map(|p| p.policy.ones().map(move |o| p.start + o as u64))
            .map(|t| t - wake + 1)
            .collect()
    }

    #[test]
    fn next_arithmetic() {
        assert_eq!(dynamic_next(3, true, 0, 0), 3);
        assert_eq!(dynamic_next(3, false, 2, 0), 9);
        assert_eq!(dynamic_next(3, false, 3, 4), 14);
    }

    #[test]
    fn lone_leader_schedule() {
        let trace = run(&SimConfig::new(40, Algorithm::DynamicSynch, vec![0]).with_k(3)).unwrap();
        assert_eq!(rounds_on(&trace, 1, PolicyKind::DynMain), vec![6, 9, 12]);
        assert_eq!(rounds_on(&trace, 1, PolicyKind::DynPass), vec![15]);
        assert!(trace.flags.is_empty(), "{:?}", trace.flags);
    }

    #[test]
    fn follower_starts_on_the_leader_pass_tick() {
        // Both wake together; id 2 wins round 1, id 1 is queued second.
        let trace = run(&SimConfig::new(40, Algorithm::DynamicSynch, vec![0, 0]).with_k(3)).unwrap();
        assert_eq!(rounds_on(&trace, 2, PolicyKind::DynMain), vec![6, 9, 12]);
        assert_eq!(rounds_on(&trace, 2, PolicyKind::DynPass), vec![15]);
        assert_eq!(rounds_on(&trace, 1, PolicyKind::DynMain), vec![15, 18, 21]);
        assert!(trace.flags.is_empty(), "{:?}", trace.flags);
    }

    #[test]
    fn late_waker_joins_the_queue() {
        let trace = run(&SimConfig::new(40, Algorithm::DynamicSynch, vec![0, 7]).with_k(3)).unwrap();
        // Leader main rounds are ticks 5, 8, 11; the late waker hears tick 8
        // in its second round and is placed right after the leader's block.
        let main2: Vec<u64> = trace
            .policies_of(ProcessorId(2))
            .filter(|p| p.kind == PolicyKind::DynMain)
            .flat_map(|p| p.policy.ones().map(move |o| p.start + o as u64))
            .collect();
        assert_eq!(main2, vec![14, 17, 20]);
        assert!(trace.flags.is_empty(), "{:?}", trace.flags);
    }
}
