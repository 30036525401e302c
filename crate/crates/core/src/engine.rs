//! Deterministic global tick loop.
//!
//! Every tick is split into four sub-rounds. In sub-round 0 each radio-on
//! processor broadcasts; in sub-rounds 1 to 3 each radio-on processor handles
//! what arrived in the previous sub-round and may answer. All deliveries of a
//! tick therefore happen inside that tick, between radio-on neighbors only.
//!
//! The loop jumps straight from one event tick (a wake-up or a radio-on tick)
//! to the next; clocks of idle processors advance implicitly.

use std::collections::BTreeMap;

use num_rational::Rational64;
use serde::{Deserialize, Serialize};

use crate::adversary::Graph;
use crate::config::{validate_with_graph, ConfigError, ProcessorId, SimConfig, Tick};
use crate::policy::PolicyString;
use crate::protocols::{make_node, Message};

/// Number of sub-rounds after the initial broadcast.
pub const REPLY_SUBROUNDS: u8 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    /// A k-basic policy (Cluster-Synch, or the independent Dynamic-Synch run).
    Basic,
    /// The single radio-on tick of a Flatten stage 2.
    Stage2,
    Naive,
    /// The `k` consecutive initial rounds of Dynamic-Synch.
    DynInitial,
    /// The `k^2`-tick main part scheduled by dynamic flattening.
    DynMain,
    /// Queue hand-off: starts on the last main-part tick, radio on k ticks later.
    DynPass,
}

/// A policy materialized on the global time line.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduledPolicy {
    pub pid: ProcessorId,
    pub start: Tick,
    pub policy: PolicyString,
    pub kind: PolicyKind,
    pub phase: u32,
}

impl ScheduledPolicy {
    /// Last tick of the full span `[start, start + |s| - 1]`.
    pub fn end(&self) -> Tick {
        self.start + self.policy.len() as Tick - 1
    }

    pub fn is_on(&self, t: Tick) -> bool {
        t >= self.start && self.policy.bit(t - self.start)
    }

    pub fn next_on(&self, from: Tick) -> Option<Tick> {
        let lo = from.max(self.start);
        (lo..=self.end()).find(|&t| self.policy.bit(t - self.start))
    }
}

/// A policy whose span contains the current tick.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ActivePolicy {
    pub kind: PolicyKind,
    pub phase: u32,
    pub offset: u64,
    pub len: u64,
    pub on: bool,
}

impl ActivePolicy {
    pub fn completes(&self) -> bool {
        self.offset + 1 == self.len
    }

    pub fn starts(&self) -> bool {
        self.offset == 0
    }
}

/// What a handler knows about the current tick.
#[derive(Clone, Debug)]
pub struct Ctx {
    pub tick: Tick,
    pub local: Tick,
    pub n: u64,
    pub m: usize,
    pub k: u64,
    pub active: Vec<ActivePolicy>,
}

impl Ctx {
    pub fn on_with(&self, kind: PolicyKind) -> Option<&ActivePolicy> {
        self.active.iter().find(|a| a.on && a.kind == kind)
    }
}

/// A received message together with the sender's fractional clock phase.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Envelope {
    pub sender: ProcessorId,
    pub msg: Message,
    /// Sender's `q`; zero on the integer engine.
    pub sender_q: Rational64,
    /// Offset between the sender's and receiver's tick boundaries.
    pub q_prime: Rational64,
}

impl Envelope {
    pub fn integral(sender: ProcessorId, msg: Message) -> Self {
        Envelope {
            sender,
            msg,
            sender_q: Rational64::from_integer(0),
            q_prime: Rational64::from_integer(0),
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) struct ScheduleRequest {
    pub local_start: Tick,
    pub policy: PolicyString,
    pub kind: PolicyKind,
    pub phase: u32,
}

/// First contact with a neighbor: tick and learned clock difference.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Contact {
    pub tick: Tick,
    pub clock_diff: i64,
}

/// Mutable per-processor state owned by the engine and handed to handlers.
#[derive(Clone, Debug)]
pub struct ProcessorState {
    pub id: ProcessorId,
    pub wake: Tick,
    /// Logical clock.
    pub tau: i64,
    /// Policy-progress counter.
    pub j: i64,
    /// Fractional phase offset, in `[-1/2, 1/2]`.
    pub q: Rational64,
    pub(crate) requests: Vec<ScheduleRequest>,
    pub(crate) flags: Vec<String>,
    pub(crate) contacts: BTreeMap<ProcessorId, Contact>,
}

impl ProcessorState {
    pub fn new(id: ProcessorId, wake: Tick) -> Self {
        ProcessorState {
            id,
            wake,
            tau: 0,
            j: 0,
            q: Rational64::from_integer(0),
            requests: Vec::new(),
            flags: Vec::new(),
            contacts: BTreeMap::new(),
        }
    }

    /// Run `policy` starting at local tick `local_start`.
    pub fn schedule(&mut self, local_start: Tick, policy: PolicyString, kind: PolicyKind, phase: u32) {
        self.requests.push(ScheduleRequest {
            local_start,
            policy,
            kind,
            phase,
        });
    }

    pub fn flag(&mut self, what: impl Into<String>) {
        self.flags.push(what.into());
    }

    /// Take the sender's clock, carrying the fractional phase along.
    pub fn adopt(&mut self, tau: i64, j: i64, env: &Envelope) {
        let (folded, q) = crate::fractional::normalize(tau, env.sender_q + env.q_prime);
        self.tau = folded;
        self.j = j + (folded - tau);
        self.q = q;
    }

    pub fn record_contact(&mut self, other: ProcessorId, tick: Tick, clock_diff: i64) {
        self.contacts.entry(other).or_insert(Contact { tick, clock_diff });
    }
}

/// Per-processor protocol logic. Handlers run only at ticks where the
/// processor's radio is on, except `on_wake`.
pub trait Node {
    fn on_wake(&mut self, st: &mut ProcessorState, ctx: &Ctx);
    fn begin_tick(&mut self, _st: &mut ProcessorState, _ctx: &Ctx) {}
    fn transmit(&mut self, st: &mut ProcessorState, ctx: &Ctx) -> Vec<Message>;
    fn receive(&mut self, st: &mut ProcessorState, ctx: &Ctx, subround: u8, inbox: &[Envelope]) -> Vec<Message>;
    fn end_tick(&mut self, _st: &mut ProcessorState, _ctx: &Ctx) {}
    /// Length of the scheduling queue while this processor holds it.
    fn queue_len(&self) -> Option<usize> {
        None
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Delivery {
    pub tick: Tick,
    pub subround: u8,
    pub sender: ProcessorId,
    pub receivers: Vec<ProcessorId>,
    pub message: Message,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Flag {
    pub tick: Tick,
    pub pid: ProcessorId,
    pub what: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueueSample {
    pub tick: Tick,
    pub pid: ProcessorId,
    pub len: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeContact {
    pub u: ProcessorId,
    pub v: ProcessorId,
    pub first: Option<Tick>,
    /// `tau_v - tau_u` as seen by `u` (or negated from `v`) at first contact.
    pub clock_diff: Option<i64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub per_processor: Vec<u64>,
    pub max: u64,
    pub sum: u64,
    /// Earliest tick from which all clocks agree through the end of the
    /// trace.
    pub sync_complete_tick: Option<Tick>,
}

/// Everything observable about one run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimTrace {
    pub config: SimConfig,
    pub k: u64,
    /// Ticks `0..end` were simulated.
    pub end: Tick,
    /// Whether the run stopped because nothing could happen any more.
    pub quiescent: bool,
    /// Radio-on sets of every tick where at least one radio was on.
    pub radio: Vec<(Tick, Vec<ProcessorId>)>,
    pub deliveries: Vec<Delivery>,
    /// Per processor: `(tick, tau)` at wake-up and at every jump.
    pub tau_segments: Vec<Vec<(Tick, i64)>>,
    /// Per processor: `(tick, J)` at wake-up and at every reset or jump.
    pub j_segments: Vec<Vec<(Tick, i64)>>,
    pub policies: Vec<ScheduledPolicy>,
    pub flags: Vec<Flag>,
    pub queue_samples: Vec<QueueSample>,
    pub edge_contacts: Vec<EdgeContact>,
    pub report: EnergyReport,
}

impl SimTrace {
    pub fn wakes(&self) -> &[Tick] {
        self.config.wake_ticks()
    }

    fn segment_value(segs: &[(Tick, i64)], t: Tick) -> Option<i64> {
        let i = segs.partition_point(|&(s, _)| s <= t);
        (i > 0).then(|| {
            let (s, v) = segs[i - 1];
            v + (t - s) as i64
        })
    }

    /// Logical clock of `pid` at tick `t` after that tick's handlers ran;
    /// `None` before wake-up.
    pub fn tau_at(&self, pid: ProcessorId, t: Tick) -> Option<i64> {
        Self::segment_value(&self.tau_segments[pid.index()], t)
    }

    pub fn j_at(&self, pid: ProcessorId, t: Tick) -> Option<i64> {
        Self::segment_value(&self.j_segments[pid.index()], t)
    }

    pub fn radio_on_at(&self, t: Tick) -> &[ProcessorId] {
        match self.radio.binary_search_by_key(&t, |(s, _)| *s) {
            Ok(i) => &self.radio[i].1,
            Err(_) => &[],
        }
    }

    pub fn policies_of(&self, pid: ProcessorId) -> impl Iterator<Item = &ScheduledPolicy> {
        self.policies.iter().filter(move |p| p.pid == pid)
    }

    /// Canonical JSON; equal for equal runs.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("trace serializes")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RunOptions {
    /// Keep every delivered message in the trace.
    pub record_messages: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { record_messages: true }
    }
}

pub fn run(cfg: &SimConfig) -> Result<SimTrace, ConfigError> {
    run_with(cfg, RunOptions::default())
}

pub fn run_with(cfg: &SimConfig, opts: RunOptions) -> Result<SimTrace, ConfigError> {
    let (cfg, graph) = validate_with_graph(cfg)?;
    Ok(World::new(cfg, graph, opts).run())
}

struct World {
    cfg: SimConfig,
    graph: Graph,
    opts: RunOptions,
    k: u64,
    nodes: Vec<Box<dyn Node>>,
    states: Vec<ProcessorState>,
    awake: Vec<bool>,
    /// Tick at which `states[i].tau` and `.j` are current.
    at: Vec<Tick>,
    /// Indices into `policies` that may still produce on-ticks.
    live: Vec<Vec<usize>>,
    next_on: Vec<Option<Tick>>,
    last_queue: Vec<Option<usize>>,
    trace: SimTrace,
}

impl World {
    fn new(cfg: SimConfig, graph: Graph, opts: RunOptions) -> Self {
        let m = cfg.m;
        let k = cfg.effective_k();
        let nodes = (0..m).map(|_| make_node(&cfg, k)).collect();
        let states = cfg
            .wake_ticks()
            .iter()
            .enumerate()
            .map(|(i, &w)| ProcessorState::new(ProcessorId::from_index(i), w))
            .collect();
        let trace = SimTrace {
            config: cfg.clone(),
            k,
            end: 0,
            quiescent: false,
            radio: Vec::new(),
            deliveries: Vec::new(),
            tau_segments: vec![Vec::new(); m],
            j_segments: vec![Vec::new(); m],
            policies: Vec::new(),
            flags: Vec::new(),
            queue_samples: Vec::new(),
            edge_contacts: Vec::new(),
            report: EnergyReport {
                per_processor: vec![0; m],
                max: 0,
                sum: 0,
                sync_complete_tick: None,
            },
        };
        World {
            cfg,
            graph,
            opts,
            k,
            nodes,
            states,
            awake: vec![false; m],
            at: vec![0; m],
            live: vec![Vec::new(); m],
            next_on: vec![None; m],
            last_queue: vec![None; m],
            trace,
        }
    }

    fn ctx(&self, i: usize, t: Tick) -> Ctx {
        let active = self.live[i]
            .iter()
            .map(|&pi| &self.trace.policies[pi])
            .filter(|p| p.start <= t && t <= p.end())
            .map(|p| ActivePolicy {
                kind: p.kind,
                phase: p.phase,
                offset: t - p.start,
                len: p.policy.len() as u64,
                on: p.is_on(t),
            })
            .collect();
        Ctx {
            tick: t,
            local: t - self.states[i].wake,
            n: self.cfg.n,
            m: self.cfg.m,
            k: self.k,
            active,
        }
    }

    fn advance(&mut self, i: usize, t: Tick) {
        let dt = (t - self.at[i]) as i64;
        self.states[i].tau += dt;
        self.states[i].j += dt;
        self.at[i] = t;
    }

    /// Move scheduling requests and flags out of the processor state.
    /// `earliest` is the first tick a new policy may still start at.
    fn drain(&mut self, i: usize, t: Tick, earliest: Tick) {
        let st = &mut self.states[i];
        for what in st.flags.drain(..) {
            self.trace.flags.push(Flag {
                tick: t,
                pid: st.id,
                what,
            });
        }
        let requests: Vec<_> = st.requests.drain(..).collect();
        for r in requests {
            let start = self.states[i].wake + r.local_start;
            if start < earliest {
                self.trace.flags.push(Flag {
                    tick: t,
                    pid: self.states[i].id,
                    what: format!("policy scheduled in the past at {start}"),
                });
                continue;
            }
            self.live[i].push(self.trace.policies.len());
            self.trace.policies.push(ScheduledPolicy {
                pid: self.states[i].id,
                start,
                policy: r.policy,
                kind: r.kind,
                phase: r.phase,
            });
        }
    }

    fn refresh_next_on(&mut self, i: usize, from: Tick) {
        let policies = &self.trace.policies;
        self.live[i].retain(|&pi| policies[pi].end() >= from);
        self.next_on[i] = self.live[i].iter().filter_map(|&pi| policies[pi].next_on(from)).min();
    }

    fn record_segments(&mut self, i: usize, t: Tick) {
        let st = &self.states[i];
        push_segment(&mut self.trace.tau_segments[i], t, st.tau);
        push_segment(&mut self.trace.j_segments[i], t, st.j);
    }

    fn deliver(
        &mut self,
        t: Tick,
        subround: u8,
        on: &[usize],
        is_on: &[bool],
        outputs: Vec<Vec<Message>>,
    ) -> Vec<Vec<Envelope>> {
        let mut inbox = vec![Vec::new(); self.cfg.m];
        // `on` is ascending, so every inbox ends up sorted by sender id.
        for (&s, msgs) in on.iter().zip(outputs) {
            if msgs.is_empty() {
                continue;
            }
            let receivers: Vec<usize> = self.graph.neighbors(s).iter().copied().filter(|&r| is_on[r]).collect();
            let sender = self.states[s].id;
            if subround == 0 {
                if let Some((tau, _)) = msgs.iter().find_map(Message::clock) {
                    for &r in &receivers {
                        let diff = tau - self.states[r].tau;
                        self.states[r].record_contact(sender, t, diff);
                    }
                }
            }
            for msg in msgs {
                for &r in &receivers {
                    inbox[r].push(Envelope::integral(sender, msg.clone()));
                }
                if self.opts.record_messages && !receivers.is_empty() {
                    self.trace.deliveries.push(Delivery {
                        tick: t,
                        subround,
                        sender,
                        receivers: receivers.iter().map(|&r| ProcessorId::from_index(r)).collect(),
                        message: msg,
                    });
                }
            }
        }
        inbox
    }

    fn step(&mut self, t: Tick, wake_order: &[usize], next_wake: &mut usize) {
        let m = self.cfg.m;
        while *next_wake < wake_order.len() && self.states[wake_order[*next_wake]].wake == t {
            let i = wake_order[*next_wake];
            *next_wake += 1;
            self.awake[i] = true;
            self.at[i] = t;
            let ctx = self.ctx(i, t);
            self.nodes[i].on_wake(&mut self.states[i], &ctx);
            self.drain(i, t, t);
            self.record_segments(i, t);
            self.refresh_next_on(i, t);
        }

        let on: Vec<usize> = (0..m).filter(|&i| self.next_on[i] == Some(t)).collect();
        if on.is_empty() {
            return;
        }
        let mut is_on = vec![false; m];
        for &i in &on {
            is_on[i] = true;
        }
        self.trace
            .radio
            .push((t, on.iter().map(|&i| ProcessorId::from_index(i)).collect()));

        let mut ctxs = Vec::with_capacity(on.len());
        for &i in &on {
            self.advance(i, t);
            let ctx = self.ctx(i, t);
            self.nodes[i].begin_tick(&mut self.states[i], &ctx);
            ctxs.push(ctx);
        }
        let outputs = on
            .iter()
            .zip(&ctxs)
            .map(|(&i, ctx)| self.nodes[i].transmit(&mut self.states[i], ctx))
            .collect();
        let mut inbox = self.deliver(t, 0, &on, &is_on, outputs);
        for sub in 1..=REPLY_SUBROUNDS {
            let outputs: Vec<Vec<Message>> = on
                .iter()
                .zip(&ctxs)
                .map(|(&i, ctx)| self.nodes[i].receive(&mut self.states[i], ctx, sub, &inbox[i]))
                .collect();
            if sub == REPLY_SUBROUNDS {
                for (&i, out) in on.iter().zip(&outputs) {
                    if !out.is_empty() {
                        self.states[i].flag("reply after the last sub-round dropped");
                    }
                }
                break;
            }
            inbox = self.deliver(t, sub, &on, &is_on, outputs);
        }
        for (&i, ctx) in on.iter().zip(&ctxs) {
            self.nodes[i].end_tick(&mut self.states[i], ctx);
            self.drain(i, t, t + 1);
            self.record_segments(i, t);
            self.refresh_next_on(i, t + 1);
            self.trace.report.per_processor[i] += 1;
            let ql = self.nodes[i].queue_len();
            if ql != self.last_queue[i] {
                self.last_queue[i] = ql;
                self.trace.queue_samples.push(QueueSample {
                    tick: t,
                    pid: self.states[i].id,
                    len: ql,
                });
            }
        }
    }

    fn run(mut self) -> SimTrace {
        let horizon = self.cfg.horizon();
        let mut wake_order: Vec<usize> = (0..self.cfg.m).collect();
        wake_order.sort_by_key(|&i| (self.states[i].wake, i));
        let mut next_wake = 0;
        let mut last_event: Option<Tick> = None;
        loop {
            let w = wake_order.get(next_wake).map(|&i| self.states[i].wake);
            let o = self.next_on.iter().flatten().min().copied();
            let t = match (w, o) {
                (None, None) => {
                    self.trace.quiescent = true;
                    self.trace.end = last_event.map_or(0, |t| t + 1);
                    break;
                }
                (a, b) => a.into_iter().chain(b).min().unwrap(),
            };
            if t >= horizon {
                self.trace.end = horizon;
                break;
            }
            self.step(t, &wake_order, &mut next_wake);
            last_event = Some(t);
        }
        self.finish()
    }

    fn finish(mut self) -> SimTrace {
        let mut edge_contacts = Vec::new();
        for (u, v) in self.graph.edges() {
            let a = self.states[u.index()].contacts.get(&v).copied();
            let b = self.states[v.index()].contacts.get(&u).copied();
            let c = match (a, b) {
                (Some(a), Some(b)) if b.tick < a.tick => Some((b.tick, -b.clock_diff)),
                (Some(a), _) => Some((a.tick, a.clock_diff)),
                (None, Some(b)) => Some((b.tick, -b.clock_diff)),
                (None, None) => None,
            };
            edge_contacts.push(EdgeContact {
                u,
                v,
                first: c.map(|c| c.0),
                clock_diff: c.map(|c| c.1),
            });
        }
        self.trace.edge_contacts = edge_contacts;
        self.trace.report = energy(&self.trace);
        self.trace
    }
}

/// Log `v` at tick `t` unless it continues the last segment. A second write
/// at the same tick replaces the first.
pub(crate) fn push_segment(segs: &mut Vec<(Tick, i64)>, t: Tick, v: i64) {
    if let Some(last) = segs.last_mut().filter(|(s, _)| *s == t) {
        last.1 = v;
        if segs.len() >= 2 {
            let (s, x) = segs[segs.len() - 2];
            if x + (t - s) as i64 == v {
                segs.pop();
            }
        }
        return;
    }
    let expected = segs.last().map(|&(s, x)| x + (t - s) as i64);
    if expected != Some(v) {
        segs.push((t, v));
    }
}

/// Recompute the energy report from the radio-on sets and clock segments.
pub fn energy(trace: &SimTrace) -> EnergyReport {
    let m = trace.config.m;
    let mut per_processor = vec![0u64; m];
    for (_, on) in &trace.radio {
        for p in on {
            per_processor[p.index()] += 1;
        }
    }
    let max = per_processor.iter().copied().max().unwrap_or(0);
    let sum = per_processor.iter().sum();
    EnergyReport {
        per_processor,
        max,
        sum,
        sync_complete_tick: sync_complete_tick(&trace.tau_segments),
    }
}

/// Earliest tick from which every processor is awake and all clocks agree at
/// every later tick covered by the segment logs.
///
/// A clock segment `(s, v)` means `tau(t) = v + (t - s)`, so two processors
/// agree on a stretch exactly when their origins `s - v` coincide.
pub fn sync_complete_tick(tau_segments: &[Vec<(Tick, i64)>]) -> Option<Tick> {
    let mut events: Vec<(Tick, usize, i64)> = tau_segments
        .iter()
        .enumerate()
        .flat_map(|(i, segs)| segs.iter().map(move |&(s, v)| (s, i, s as i64 - v)))
        .collect();
    events.sort_unstable();
    let m = tau_segments.len();
    let mut origin: Vec<Option<i64>> = vec![None; m];
    let mut candidate = None;
    let mut idx = 0;
    while idx < events.len() {
        let t = events[idx].0;
        while idx < events.len() && events[idx].0 == t {
            origin[events[idx].1] = Some(events[idx].2);
            idx += 1;
        }
        let first = origin[0];
        let equal = first.is_some() && origin.iter().all(|&o| o == first);
        candidate = match (equal, candidate) {
            (true, None) => Some(t),
            (true, c) => c,
            (false, _) => None,
        };
    }
    candidate
}
