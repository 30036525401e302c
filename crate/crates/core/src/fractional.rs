//! Non-integer wake offsets.
//!
//! Time is scaled by an even common denominator `D` of the wake offsets, so
//! local tick `j` of a processor waking at `w` is the half-open interval
//! `[w D + j D, w D + (j + 1) D)`. Two radio-on ticks communicate when they
//! overlap for at least half a unit, i.e. when their starts differ by at most
//! `D / 2`. Each processor carries a phase `q` in `[-1/2, 1/2]`; on adoption
//! it takes `q_v + q'` with `q' = (s_u - s_v) / D` and folds whole units into
//! `tau`. That keeps `tau + q - (wake + local)` equal to the sender's, so all
//! synchronized processors share one exact value of it.
//!
//! Only protocols that talk in the first reply sub-round run here: naive,
//! pairwise, Cluster-Synch and Synchronize.

use std::collections::BTreeMap;

use num_integer::Integer;
use num_rational::Rational64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::Graph;
use crate::config::{validate_with_graph, Algorithm, ConfigError, ProcessorId, SimConfig, Tick, WakeSpec};
use crate::engine::{
    push_segment, ActivePolicy, Ctx, Envelope, Flag, Node, ProcessorState, ScheduledPolicy, SimTrace, REPLY_SUBROUNDS,
};
use crate::protocols::{make_node, Message};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FracError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("algorithm {0} needs more than one reply sub-round and has no fractional mode")]
    Unsupported(Algorithm),
    #[error("bad offset {0:?}: expected an integer or p/q")]
    BadOffset(String),
    #[error("offset {0} outside [0, {1}]")]
    OffsetOutOfRange(Rational64, u64),
    #[error("overlap {0} outside [1/2, 1]")]
    OverlapOutOfRange(Rational64),
}

fn half() -> Rational64 {
    Rational64::new(1, 2)
}

/// Fold `q` back into `[-1/2, 1/2]`, moving whole units into `tau`.
///
/// `q` is a sum of two values in `[-1/2, 1/2]`, so one step suffices.
pub fn normalize(tau: i64, q: Rational64) -> (i64, Rational64) {
    if q > half() {
        (tau + 1, q - 1)
    } else if q < -half() {
        (tau - 1, q + 1)
    } else {
        (tau, q)
    }
}

/// Overlap of two unit-length radio intervals starting at `u` and `v`;
/// `None` when it is shorter than half a unit and nothing gets through.
pub fn overlap_fraction(u: Rational64, v: Rational64) -> Option<Rational64> {
    let d = if u >= v { u - v } else { v - u };
    let q = Rational64::from_integer(1) - d;
    (q >= half()).then_some(q)
}

/// Offset from the sender's tick boundary to the receiver's, given their
/// overlap `q`: `1 - q` if the receiver turned its radio on later, else
/// `q - 1`.
pub fn q_prime(q: Rational64, receiver_after_sender: bool) -> Result<Rational64, FracError> {
    if q < half() || q > Rational64::from_integer(1) {
        return Err(FracError::OverlapOutOfRange(q));
    }
    let one = Rational64::from_integer(1);
    Ok(if receiver_after_sender { one - q } else { q - one })
}

/// Clock and phase after adopting `(tau_v, q_v)` across offset `q'`.
pub fn adopt_fractional(tau_v: i64, q_v: Rational64, q_prime: Rational64) -> (i64, Rational64) {
    normalize(tau_v, q_v + q_prime)
}

/// Parse `"p/q"` or an integer.
pub fn parse_offset(s: &str) -> Result<Rational64, FracError> {
    s.trim()
        .parse::<Rational64>()
        .map_err(|_| FracError::BadOffset(s.to_string()))
}

/// Seeded offsets in `[0, n]` with denominators up to `max_den`.
pub fn random_offsets(n: u64, m: usize, max_den: i64, seed: u64) -> Vec<Rational64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..m)
        .map(|_| {
            let den = rng.gen_range(1..=max_den);
            Rational64::new(rng.gen_range(0..=n as i64 * den), den)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FracConfig {
    /// Everything except the wake offsets, which `wakes` replaces.
    pub base: SimConfig,
    pub wakes: Vec<Rational64>,
}

impl FracConfig {
    pub fn new(n: u64, algorithm: Algorithm, wakes: Vec<Rational64>) -> Self {
        let floor = wakes.iter().map(|w| w.floor().to_integer().max(0) as Tick).collect();
        FracConfig {
            base: SimConfig::new(n, algorithm, floor),
            wakes,
        }
    }

    /// Common even denominator of all offsets.
    pub fn denominator(&self) -> i64 {
        2 * self.wakes.iter().fold(1i64, |d, w| d.lcm(w.denom()))
    }
}

/// Trace of a fractional run. Policy starts, on-ticks and clock segments are
/// in each processor's local ticks.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FracTrace {
    pub config: FracConfig,
    pub k: u64,
    pub denominator: i64,
    /// Offsets shifted so the earliest is 0.
    pub wakes: Vec<Rational64>,
    pub quiescent: bool,
    pub policies: Vec<ScheduledPolicy>,
    pub on_ticks: Vec<Vec<Tick>>,
    pub tau_segments: Vec<Vec<(Tick, i64)>>,
    pub j_segments: Vec<Vec<(Tick, i64)>>,
    pub q_segments: Vec<Vec<(Tick, Rational64)>>,
    /// Flag ticks are `floor` of the real start time.
    pub flags: Vec<Flag>,
    pub energy: Vec<u64>,
}

impl FracTrace {
    /// `tau + q - (wake + local)` at the last clock change of `pid`. Equal
    /// values mean equal exact clocks at every instant.
    pub fn exact_offset(&self, pid: ProcessorId) -> Rational64 {
        let i = pid.index();
        let (t, tau) = *self.tau_segments[i].last().expect("woke up");
        let q = self.q_at(i, t);
        Rational64::from_integer(tau - t as i64) + q - self.wakes[i]
    }

    fn q_at(&self, i: usize, t: Tick) -> Rational64 {
        let segs = &self.q_segments[i];
        let idx = segs.partition_point(|&(s, _)| s <= t);
        segs[idx - 1].1
    }

    /// Whether every processor ends with the same exact offset.
    pub fn synchronized(&self) -> bool {
        let first = self.exact_offset(ProcessorId::from_index(0));
        (1..self.wakes.len()).all(|i| self.exact_offset(ProcessorId::from_index(i)) == first)
    }

    /// Largest difference between displayed clocks, sampled at every tick
    /// boundary during two units after the last clock change.
    pub fn displayed_spread(&self) -> i64 {
        let m = self.wakes.len();
        let last = |i: usize| {
            let (t, tau) = *self.tau_segments[i].last().expect("woke up");
            (self.wakes[i] + t as i64, t, tau)
        };
        let from = (0..m).map(|i| last(i).0).max().expect("m ≥ 1");
        let clock = |i: usize, x: Rational64| {
            let (_, t, tau) = last(i);
            let local = (x - self.wakes[i]).floor().to_integer();
            tau + local - t as i64
        };
        let mut spread = 0;
        for i in 0..m {
            let phase = (self.wakes[i] - from).fract();
            let phase = if phase < Rational64::from_integer(0) {
                phase + 1
            } else {
                phase
            };
            for step in 0..2 {
                let x = from + phase + step;
                let clocks: Vec<i64> = (0..m).map(|u| clock(u, x)).collect();
                let (lo, hi) = (clocks.iter().min().unwrap(), clocks.iter().max().unwrap());
                spread = spread.max(hi - lo);
            }
        }
        spread
    }

    /// The integer-engine view, available when every offset is integral.
    pub fn integer_view(&self) -> Option<IntegerView> {
        let wakes: Vec<Tick> = self
            .wakes
            .iter()
            .map(|w| w.is_integer().then(|| w.to_integer() as Tick))
            .collect::<Option<_>>()?;
        let shift = |segs: &Vec<(Tick, i64)>, w: Tick| segs.iter().map(|&(t, v)| (t + w, v)).collect();
        let mut radio: BTreeMap<Tick, Vec<ProcessorId>> = BTreeMap::new();
        for (i, ticks) in self.on_ticks.iter().enumerate() {
            for &t in ticks {
                radio.entry(t + wakes[i]).or_default().push(ProcessorId::from_index(i));
            }
        }
        Some(IntegerView {
            radio: radio.into_iter().collect(),
            tau_segments: self
                .tau_segments
                .iter()
                .zip(&wakes)
                .map(|(s, &w)| shift(s, w))
                .collect(),
            j_segments: self.j_segments.iter().zip(&wakes).map(|(s, &w)| shift(s, w)).collect(),
            policies: self
                .policies
                .iter()
                .map(|p| ScheduledPolicy {
                    start: p.start + wakes[p.pid.index()],
                    ..p.clone()
                })
                .collect(),
            flags: self.flags.clone(),
            energy: self.energy.clone(),
        })
    }
}

/// The parts of a run both engines produce, on the global integer time line.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntegerView {
    pub radio: Vec<(Tick, Vec<ProcessorId>)>,
    pub tau_segments: Vec<Vec<(Tick, i64)>>,
    pub j_segments: Vec<Vec<(Tick, i64)>>,
    pub policies: Vec<ScheduledPolicy>,
    pub flags: Vec<Flag>,
    pub energy: Vec<u64>,
}

impl IntegerView {
    pub fn from_trace(trace: &SimTrace) -> Self {
        IntegerView {
            radio: trace.radio.clone(),
            tau_segments: trace.tau_segments.clone(),
            j_segments: trace.j_segments.clone(),
            policies: trace.policies.clone(),
            flags: trace.flags.clone(),
            energy: trace.report.per_processor.clone(),
        }
    }
}

/// A radio-on tick whose broadcast is fixed and waiting for partners.
struct Slot {
    pid: usize,
    /// Scaled start.
    start: i64,
    local: Tick,
    q: Rational64,
    outbox: Vec<Message>,
    ctx: Ctx,
    closed: bool,
}

struct FracWorld {
    cfg: FracConfig,
    graph: Graph,
    n: u64,
    k: u64,
    d: i64,
    /// Scaled wake times.
    wake: Vec<i64>,
    nodes: Vec<Box<dyn Node>>,
    states: Vec<ProcessorState>,
    awake: Vec<bool>,
    /// Local tick at which `tau` and `j` are current.
    at: Vec<Tick>,
    live: Vec<Vec<usize>>,
    next_on: Vec<Option<Tick>>,
    trace: FracTrace,
}

pub fn run_fractional(cfg: &FracConfig) -> Result<FracTrace, FracError> {
    let alg = cfg.base.algorithm;
    if alg == Algorithm::DynamicSynch {
        return Err(FracError::Unsupported(alg));
    }
    let n = cfg.base.n;
    if n == 0 {
        return Err(ConfigError::ZeroWindow.into());
    }
    if cfg.wakes.len() != cfg.base.m {
        return Err(ConfigError::WakeCount {
            expected: cfg.base.m,
            got: cfg.wakes.len(),
        }
        .into());
    }
    let zero = Rational64::from_integer(0);
    if let Some(&w) = cfg
        .wakes
        .iter()
        .find(|&&w| w < zero || w > Rational64::from_integer(n as i64))
    {
        return Err(FracError::OffsetOutOfRange(w, n));
    }
    let mut shadow = cfg.base.clone();
    shadow.wakes = WakeSpec::Explicit(cfg.wakes.iter().map(|w| w.floor().to_integer() as Tick).collect());
    let (shadow, graph) = validate_with_graph(&shadow)?;
    Ok(FracWorld::new(cfg.clone(), shadow, graph).run())
}

impl FracWorld {
    fn new(cfg: FracConfig, shadow: SimConfig, graph: Graph) -> Self {
        let m = cfg.base.m;
        let k = shadow.effective_k();
        let d = cfg.denominator();
        let min = cfg.wakes.iter().copied().min().expect("m ≥ 1");
        let wakes: Vec<Rational64> = cfg.wakes.iter().map(|&w| w - min).collect();
        let wake = wakes.iter().map(|w| (w * d).to_integer()).collect();
        let trace = FracTrace {
            config: cfg.clone(),
            k,
            denominator: d,
            wakes,
            quiescent: false,
            policies: Vec::new(),
            on_ticks: vec![Vec::new(); m],
            tau_segments: vec![Vec::new(); m],
            j_segments: vec![Vec::new(); m],
            q_segments: vec![Vec::new(); m],
            flags: Vec::new(),
            energy: vec![0; m],
        };
        FracWorld {
            n: shadow.n,
            nodes: (0..m).map(|_| make_node(&shadow, k)).collect(),
            states: (0..m)
                .map(|i| ProcessorState::new(ProcessorId::from_index(i), 0))
                .collect(),
            cfg,
            graph,
            k,
            d,
            wake,
            awake: vec![false; m],
            at: vec![0; m],
            live: vec![Vec::new(); m],
            next_on: vec![None; m],
            trace,
        }
    }

    fn global_tick(&self, i: usize, local: Tick) -> Tick {
        (self.wake[i] + local as i64 * self.d).div_euclid(self.d) as Tick
    }

    fn ctx(&self, i: usize, local: Tick) -> Ctx {
        let active = self.live[i]
            .iter()
            .map(|&pi| &self.trace.policies[pi])
            .filter(|p| p.start <= local && local <= p.end())
            .map(|p| ActivePolicy {
                kind: p.kind,
                phase: p.phase,
                offset: local - p.start,
                len: p.policy.len() as u64,
                on: p.is_on(local),
            })
            .collect();
        Ctx {
            tick: self.global_tick(i, local),
            local,
            n: self.n,
            m: self.cfg.base.m,
            k: self.k,
            active,
        }
    }

    fn advance(&mut self, i: usize, local: Tick) {
        let dt = (local - self.at[i]) as i64;
        self.states[i].tau += dt;
        self.states[i].j += dt;
        self.at[i] = local;
    }

    fn drain(&mut self, i: usize, local: Tick, earliest: Tick) {
        let tick = self.global_tick(i, local);
        let st = &mut self.states[i];
        for what in st.flags.drain(..) {
            self.trace.flags.push(Flag { tick, pid: st.id, what });
        }
        let requests: Vec<_> = st.requests.drain(..).collect();
        for r in requests {
            if r.local_start < earliest {
                let start = self.global_tick(i, r.local_start);
                self.trace.flags.push(Flag {
                    tick,
                    pid: self.states[i].id,
                    what: format!("policy scheduled in the past at {start}"),
                });
                continue;
            }
            self.live[i].push(self.trace.policies.len());
            self.trace.policies.push(ScheduledPolicy {
                pid: self.states[i].id,
                start: r.local_start,
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

    fn record(&mut self, i: usize, local: Tick) {
        let st = &self.states[i];
        push_segment(&mut self.trace.tau_segments[i], local, st.tau);
        push_segment(&mut self.trace.j_segments[i], local, st.j);
        let qs = &mut self.trace.q_segments[i];
        match qs.last_mut() {
            Some(last) if last.0 == local => last.1 = st.q,
            Some(last) if last.1 == st.q => {}
            _ => qs.push((local, st.q)),
        }
        if qs.len() >= 2 && qs[qs.len() - 2].1 == qs[qs.len() - 1].1 {
            qs.pop();
        }
    }

    fn next_start(&self, i: usize) -> Option<i64> {
        self.next_on[i].map(|l| self.wake[i] + l as i64 * self.d)
    }

    fn wake_up(&mut self, i: usize) {
        self.awake[i] = true;
        let ctx = self.ctx(i, 0);
        self.nodes[i].on_wake(&mut self.states[i], &ctx);
        self.drain(i, 0, 0);
        self.record(i, 0);
        self.refresh_next_on(i, 0);
    }

    fn open_slot(&mut self, i: usize) -> Slot {
        let local = self.next_on[i].expect("radio-on tick");
        self.advance(i, local);
        let ctx = self.ctx(i, local);
        self.nodes[i].begin_tick(&mut self.states[i], &ctx);
        let outbox = self.nodes[i].transmit(&mut self.states[i], &ctx);
        self.next_on[i] = None;
        Slot {
            pid: i,
            start: self.wake[i] + local as i64 * self.d,
            local,
            q: self.states[i].q,
            outbox,
            ctx,
            closed: false,
        }
    }

    /// Every broadcast from an adjacent slot starting within half a unit of
    /// `slot`, in ascending sender id.
    fn inbox(&self, slot: &Slot, open: &[Slot]) -> Vec<Envelope> {
        let u = slot.pid;
        let mut partners: Vec<&Slot> = open
            .iter()
            .filter(|s| s.pid != u && self.graph.adjacent(u, s.pid) && 2 * (s.start - slot.start).abs() <= self.d)
            .collect();
        partners.sort_by_key(|s| (s.pid, s.start));
        partners
            .into_iter()
            .flat_map(|s| {
                s.outbox.iter().map(move |msg| Envelope {
                    sender: ProcessorId::from_index(s.pid),
                    msg: msg.clone(),
                    sender_q: s.q,
                    q_prime: Rational64::new(slot.start - s.start, self.d),
                })
            })
            .collect()
    }

    fn close_slot(&mut self, u: usize, local: Tick, ctx: &Ctx, inbox: Vec<Envelope>) {
        let mut inbox = inbox;
        for sub in 1..=REPLY_SUBROUNDS {
            let out = self.nodes[u].receive(&mut self.states[u], ctx, sub, &inbox);
            if !out.is_empty() {
                self.states[u].flag("reply sub-round has no fractional delivery; dropped");
            }
            inbox = Vec::new();
        }
        self.nodes[u].end_tick(&mut self.states[u], ctx);
        self.drain(u, local, local + 1);
        self.record(u, local);
        self.refresh_next_on(u, local + 1);
        self.trace.on_ticks[u].push(local);
        self.trace.energy[u] += 1;
    }

    fn run(mut self) -> FracTrace {
        let m = self.cfg.base.m;
        let horizon = self.cfg.base.horizon() as i64 * self.d;
        let half = self.d / 2;
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by_key(|&i| (self.wake[i], i));
        let mut next_wake = 0;
        let mut open: Vec<Slot> = Vec::new();
        loop {
            let w = order.get(next_wake).map(|&i| self.wake[i]);
            let s = (0..m).filter_map(|i| self.next_start(i)).filter(|&s| s < horizon).min();
            let c = open.iter().filter(|sl| !sl.closed).map(|sl| sl.start + half).min();
            let Some(x) = [w, s, c].into_iter().flatten().min() else {
                self.trace.quiescent = self.next_on.iter().all(Option::is_none);
                break;
            };
            while next_wake < m && self.wake[order[next_wake]] == x {
                let i = order[next_wake];
                next_wake += 1;
                self.wake_up(i);
            }
            for i in 0..m {
                if self.next_start(i) == Some(x) && x < horizon {
                    let slot = self.open_slot(i);
                    open.push(slot);
                }
            }
            for j in 0..open.len() {
                if !open[j].closed && open[j].start + half == x {
                    let inbox = self.inbox(&open[j], &open);
                    let (u, local, ctx) = (open[j].pid, open[j].local, open[j].ctx.clone());
                    self.close_slot(u, local, &ctx, inbox);
                    open[j].closed = true;
                }
            }
            open.retain(|sl| sl.start + self.d >= x);
        }
        self.trace
    }
}
