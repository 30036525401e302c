//! Synchronize: Cluster-Synch followed by a fixed number of Flatten phases
//! and one final Cluster-Synch.

use crate::config::ProcessorId;
use crate::engine::{Ctx, Envelope, Node, PolicyKind, ProcessorState};
use crate::policy::{basic_policy, PolicyString};

use super::{early_sync, flatten_next, Message};

/// Ticks from policy completion to the stage-2 tick.
///
/// Nominally `2n - J`. When the cluster already ran for `2n` ticks or more
/// that would not be in the future, so the report happens on the next tick.
pub fn flatten_wait(n: u64, j: i64) -> u64 {
    (2 * n as i64 - j).max(1) as u64
}

/// Logical start of the next policy given the collected stage-2 reports.
///
/// `reports` holds `(id, J)` pairs including the processor's own. The
/// recentred block is never placed at or before the current clock: if the
/// nominal start `2n + tau + floor((len_c - ell k^2) / 2)` is not in the
/// future, the block starts at `tau + 1` instead.
pub fn schedule_after_report(n: u64, k: u64, tau: i64, own: ProcessorId, reports: &[(ProcessorId, i64)]) -> i64 {
    let mut sorted: Vec<_> = reports.to_vec();
    sorted.sort_by_key(|&(id, _)| id);
    sorted.dedup_by_key(|&mut (id, _)| id);
    let len_c = sorted.iter().map(|&(_, j)| j).max().unwrap_or(0);
    let ell = sorted.len() as u64;
    let mu = sorted.iter().position(|&(id, _)| id == own).unwrap_or(0) as u64;
    let base = flatten_next(n, tau, len_c, ell, 0, k).max(tau + 1);
    base + (mu * k * k) as i64
}

pub struct SynchronizeNode {
    n: u64,
    k: u64,
    flatten_phases: u32,
    phase: u32,
    /// J sampled when the last basic policy completed.
    completed_j: i64,
    basic: PolicyString,
}

impl SynchronizeNode {
    pub fn new(n: u64, k: u64, flatten_phases: u32) -> Self {
        SynchronizeNode {
            n,
            k,
            flatten_phases,
            phase: 0,
            completed_j: 0,
            basic: basic_policy(k).expect("k ≥ 1"),
        }
    }
}

impl Node for SynchronizeNode {
    fn on_wake(&mut self, st: &mut ProcessorState, _ctx: &Ctx) {
        st.schedule(0, self.basic.clone(), PolicyKind::Basic, 0);
    }

    fn begin_tick(&mut self, st: &mut ProcessorState, ctx: &Ctx) {
        if ctx.on_with(PolicyKind::Basic).is_some_and(|a| a.starts()) {
            st.j = 0;
        }
    }

    fn transmit(&mut self, st: &mut ProcessorState, ctx: &Ctx) -> Vec<Message> {
        let mut out = Vec::new();
        if ctx.on_with(PolicyKind::Basic).is_some() {
            out.push(Message::Sync {
                id: st.id,
                tau: st.tau,
                j: st.j,
            });
        }
        if ctx.on_with(PolicyKind::Stage2).is_some() {
            out.push(Message::FlattenReport {
                id: st.id,
                j: self.completed_j,
            });
        }
        out
    }

    fn receive(&mut self, st: &mut ProcessorState, ctx: &Ctx, subround: u8, inbox: &[Envelope]) -> Vec<Message> {
        if subround != 1 {
            return Vec::new();
        }
        if ctx.on_with(PolicyKind::Basic).is_some() {
            let syncs: Vec<Envelope> = inbox
                .iter()
                .filter(|e| matches!(e.msg, Message::Sync { .. }))
                .cloned()
                .collect();
            early_sync(st, &syncs);
        }
        if ctx.on_with(PolicyKind::Stage2).is_some() {
            let mut reports = vec![(st.id, self.completed_j)];
            reports.extend(inbox.iter().filter_map(|e| match e.msg {
                Message::FlattenReport { id, j } => Some((id, j)),
                _ => None,
            }));
            let next = schedule_after_report(self.n, self.k, st.tau, st.id, &reports);
            self.phase += 1;
            let start = ctx.local + (next - st.tau) as u64;
            st.schedule(start, self.basic.clone(), PolicyKind::Basic, self.phase);
        }
        Vec::new()
    }

    fn end_tick(&mut self, st: &mut ProcessorState, ctx: &Ctx) {
        let Some(a) = ctx.on_with(PolicyKind::Basic) else {
            return;
        };
        if a.completes() && self.phase < self.flatten_phases {
            self.completed_j = st.j;
            let wait = flatten_wait(self.n, st.j);
            st.schedule(
                ctx.local + wait,
                PolicyString::parse("1", 1).expect("literal"),
                PolicyKind::Stage2,
                self.phase,
            );
        }
    }
}
