//! Post-hoc analysis of a trace: discontinuity points, clusters, covering
//! weights, and checkers for the structural guarantees of the protocols.
//!
//! A policy is performed during its whole span `[start, start + |s| - 1]`,
//! zero bits included. A tick is a discontinuity point when no policy is in
//! progress there, or when every policy in progress completes there.

use std::collections::{BTreeMap, BTreeSet};

use num_rational::Rational64;
use serde::{Deserialize, Serialize};

use crate::config::{ceil_log2, Algorithm, ProcessorId, Tick};
use crate::engine::{PolicyKind, ScheduledPolicy, SimTrace};
use crate::policy::policy_len;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cluster {
    /// First and last tick of the cluster.
    pub start: Tick,
    pub end: Tick,
    pub members: BTreeSet<ProcessorId>,
    /// Indices of the member policies in the slice the cluster was built from.
    pub policies: Vec<usize>,
    /// Sum of `policy_len` over member policies.
    pub cwet: u64,
}

impl Cluster {
    pub fn span_len(&self) -> u64 {
        self.end - self.start + 1
    }

    pub fn cden(&self) -> Rational64 {
        Rational64::new(self.cwet as i64, self.span_len() as i64)
    }

    pub fn contains(&self, t: Tick) -> bool {
        self.start <= t && t <= self.end
    }
}

/// Main-part weight of an interval.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntervalStats {
    pub start: Tick,
    pub end: Tick,
    /// Sum over policies of the length of their main part clipped to the
    /// interval.
    pub cwet: u64,
    pub policies_touched: usize,
}

impl IntervalStats {
    pub fn cden(&self) -> Rational64 {
        Rational64::new(self.cwet as i64, (self.end - self.start + 1) as i64)
    }
}

fn span(p: &ScheduledPolicy) -> (Tick, Tick) {
    (p.start, p.end())
}

/// Discontinuity points in `0..horizon`.
pub fn discontinuity_points(policies: &[ScheduledPolicy], horizon: Tick) -> Vec<Tick> {
    let mut in_progress = vec![0u32; horizon as usize];
    let mut not_ending = vec![0u32; horizon as usize];
    for p in policies {
        let (s, e) = span(p);
        for t in s..=e.min(horizon.saturating_sub(1)) {
            in_progress[t as usize] += 1;
            if t != e {
                not_ending[t as usize] += 1;
            }
        }
    }
    (0..horizon)
        .filter(|&t| in_progress[t as usize] == 0 || not_ending[t as usize] == 0)
        .collect()
}

pub fn is_discontinuity(policies: &[ScheduledPolicy], t: Tick) -> bool {
    policies
        .iter()
        .map(span)
        .filter(|&(s, e)| s <= t && t <= e)
        .all(|(_, e)| e == t)
}

/// Maximal continuous intervals of policy activity.
pub fn clusters(policies: &[ScheduledPolicy]) -> Vec<Cluster> {
    let mut order: Vec<usize> = (0..policies.len()).collect();
    order.sort_by_key(|&i| (policies[i].start, policies[i].end(), i));
    let mut out: Vec<Cluster> = Vec::new();
    for i in order {
        let p = &policies[i];
        let (s, e) = span(p);
        let weight = policy_len(&p.policy).unwrap_or(0);
        match out.last_mut() {
            // A policy starting at or before the current end keeps that end
            // from being a discontinuity point.
            Some(c) if s <= c.end => {
                c.end = c.end.max(e);
                c.members.insert(p.pid);
                c.policies.push(i);
                c.cwet += weight;
            }
            _ => out.push(Cluster {
                start: s,
                end: e,
                members: BTreeSet::from([p.pid]),
                policies: vec![i],
                cwet: weight,
            }),
        }
    }
    for c in &mut out {
        c.policies.sort_unstable();
    }
    out
}

/// Clusters formed by the policies selected by `keep`; indices in the result
/// refer to the full slice.
pub fn clusters_where(policies: &[ScheduledPolicy], keep: impl Fn(&ScheduledPolicy) -> bool) -> Vec<Cluster> {
    let idx: Vec<usize> = (0..policies.len()).filter(|&i| keep(&policies[i])).collect();
    let sub: Vec<ScheduledPolicy> = idx.iter().map(|&i| policies[i].clone()).collect();
    let mut cs = clusters(&sub);
    for c in &mut cs {
        for p in &mut c.policies {
            *p = idx[*p];
        }
    }
    cs
}

/// Per-tick scan used to cross-check [`clusters`].
pub fn clusters_by_scan(policies: &[ScheduledPolicy], horizon: Tick) -> Vec<(Tick, Tick, BTreeSet<ProcessorId>)> {
    let disc: BTreeSet<Tick> = discontinuity_points(policies, horizon).into_iter().collect();
    let busy = |t: Tick| policies.iter().any(|p| p.start <= t && t <= p.end());
    let mut out = Vec::new();
    let mut t = 0;
    while t < horizon {
        if !busy(t) {
            t += 1;
            continue;
        }
        let s = t;
        while !disc.contains(&t) && t + 1 < horizon {
            t += 1;
        }
        let members = policies
            .iter()
            .filter(|p| p.start <= t && p.end() >= s)
            .map(|p| p.pid)
            .collect();
        out.push((s, t, members));
        t += 1;
    }
    out
}

/// Main-part weight of `[a, b]`, each main part clipped to the interval.
pub fn interval_stats(policies: &[ScheduledPolicy], a: Tick, b: Tick) -> IntervalStats {
    let mut cwet = 0;
    let mut touched = 0;
    for p in policies {
        let main_start = p.start + p.policy.initial_len() as Tick;
        let main_end = p.end();
        if p.start <= b && p.end() >= a {
            touched += 1;
        }
        if main_start > main_end {
            continue;
        }
        let lo = main_start.max(a);
        let hi = main_end.min(b);
        if lo <= hi {
            cwet += hi - lo + 1;
        }
    }
    IntervalStats {
        start: a,
        end: b,
        cwet,
        policies_touched: touched,
    }
}

/// Whether `[a, b]` is continuous: no discontinuity point in `[a, b)`, so a
/// single cluster covers the whole interval.
pub fn check_continuity(policies: &[ScheduledPolicy], a: Tick, b: Tick) -> bool {
    clusters(policies).iter().any(|c| c.start <= a && b <= c.end)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Failure {
    pub interval: (Tick, Tick),
    pub what: String,
}

/// Outcome of one structural check.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    /// Items the check was evaluated on.
    pub checked: usize,
    /// Items outside the check's preconditions.
    pub skipped: usize,
    pub failures: Vec<Failure>,
}

impl CheckReport {
    fn new(name: &str) -> Self {
        CheckReport {
            name: name.to_string(),
            ..CheckReport::default()
        }
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    fn fail(&mut self, interval: (Tick, Tick), what: impl Into<String>) {
        self.failures.push(Failure {
            interval,
            what: what.into(),
        });
    }

    pub fn merge(&mut self, other: CheckReport) {
        self.checked += other.checked;
        self.skipped += other.skipped;
        self.failures.extend(other.failures);
    }
}

fn flatten_phases(trace: &SimTrace) -> u32 {
    match trace.config.algorithm {
        Algorithm::Synchronize => ceil_log2(trace.config.n) as u32,
        _ => 0,
    }
}

/// Flatten geometry of one phase of a Synchronize trace.
///
/// Evaluated on every cluster `[p, q]` formed by phase-`phase` basic policies
/// that runs the procedure as designed: shorter than `2n` (so the stage-2
/// wait `2n - J` is positive), not overlapped by basic policies of another
/// phase, and with a recentred block that starts in the future
/// (`ell k^2 <= 4n + (q - p) - 2`). Other clusters are counted as skipped.
///
/// For each evaluated cluster: every member reports at `p + 2n`; the members'
/// next policies start `k^2` apart in id order, so their main parts tile
/// exactly `ell k^2` ticks; and their span contains every tick of
/// `[4n + (p+q)/2 - ell k^2 / 2, 4n + (p+q)/2 + ell k^2 / 2]`.
pub fn check_flatten_phase(trace: &SimTrace, phase: u32) -> CheckReport {
    let mut report = CheckReport::new("flatten");
    if phase >= flatten_phases(trace) {
        return report;
    }
    let n = trace.config.n;
    let k = trace.k;
    let block = k * k;
    let policies = &trace.policies;
    let basics = clusters_where(policies, |p| p.kind == PolicyKind::Basic);
    let foreign = |c: &Cluster| c.policies.iter().any(|&i| policies[i].phase != phase);
    for c in basics
        .iter()
        .filter(|c| c.policies.iter().any(|&i| policies[i].phase == phase))
    {
        let (p, q) = (c.start, c.end);
        let ell = c.members.len() as u64;
        let applicable = !foreign(c) && q - p < 2 * n && ell * block + 2 <= 4 * n + (q - p);
        if !applicable {
            report.skipped += 1;
            continue;
        }
        report.checked += 1;
        for &pid in &c.members {
            let stage2: Vec<Tick> = trace
                .policies_of(pid)
                .filter(|s| s.kind == PolicyKind::Stage2 && s.phase == phase)
                .map(|s| s.start)
                .collect();
            if stage2 != [p + 2 * n] {
                report.fail(
                    (p, q),
                    format!("processor {pid} reports at {stage2:?}, expected {}", p + 2 * n),
                );
            }
        }
        let mut next: Vec<(ProcessorId, Tick)> = Vec::new();
        for &pid in &c.members {
            match trace
                .policies_of(pid)
                .find(|s| s.kind == PolicyKind::Basic && s.phase == phase + 1)
            {
                Some(s) => next.push((pid, s.start)),
                None => report.fail((p, q), format!("processor {pid} has no next policy")),
            }
        }
        if next.len() as u64 != ell {
            continue;
        }
        let s0 = next[0].1;
        for (mu, &(pid, s)) in next.iter().enumerate() {
            if s != s0 + mu as u64 * block {
                report.fail(
                    (p, q),
                    format!("processor {pid} restarts at {s}, expected {}", s0 + mu as u64 * block),
                );
            }
        }
        let span_end = s0 + ell * block + k - 1;
        let lo2 = 8 * n + p + q - ell * block;
        let hi2 = 8 * n + p + q + ell * block;
        let (need_lo, need_hi) = (lo2.div_ceil(2), hi2 / 2);
        if s0 > need_lo || span_end < need_hi {
            report.fail(
                (p, q),
                format!("successor span [{s0}, {span_end}] misses [{need_lo}, {need_hi}]"),
            );
        }
    }
    report
}

/// Flatten geometry over every phase that has a successor.
pub fn check_flatten(trace: &SimTrace) -> CheckReport {
    let mut all = CheckReport::new("flatten");
    for phase in 0..flatten_phases(trace) {
        all.merge(check_flatten_phase(trace, phase));
    }
    all
}

pub fn check_continuity_in(trace: &SimTrace, a: Tick, b: Tick) -> bool {
    check_continuity(&trace.policies, a, b)
}

/// Last flatten phase window: `[L 4n, L 4n + 2n]`.
pub fn final_window(trace: &SimTrace) -> (Tick, Tick) {
    let n = trace.config.n;
    let l = flatten_phases(trace) as u64;
    (l * 4 * n, l * 4 * n + 2 * n)
}

/// Every processor performing a phase-0 policy at `t` in `[0, 2n]` belongs
/// to whichever cluster covers `t + 4n i`, for each later phase `i`.
pub fn check_cluster_containment(trace: &SimTrace) -> CheckReport {
    let mut report = CheckReport::new("containment");
    let n = trace.config.n;
    let policies = &trace.policies;
    let cs = clusters_where(policies, |p| p.kind == PolicyKind::Basic);
    for p0 in policies.iter().filter(|p| p.kind == PolicyKind::Basic && p.phase == 0) {
        for i in 1..=flatten_phases(trace) as u64 {
            for t in p0.start..=p0.end().min(2 * n) {
                let target = t + 4 * n * i;
                if let Some(c) = cs.iter().find(|c| c.contains(target)) {
                    report.checked += 1;
                    if !c.members.contains(&p0.pid) {
                        report.fail((c.start, c.end), format!("processor {} missing at {target}", p0.pid));
                    }
                }
            }
        }
    }
    report
}

/// Within every cluster of phase-0 basic policies, each processor has the
/// earliest processor's clock once its initial part is complete.
pub fn check_relay(trace: &SimTrace) -> CheckReport {
    let mut report = CheckReport::new("relay");
    let k = trace.k;
    let policies = &trace.policies;
    let phase0 = |p: &ScheduledPolicy| p.kind == PolicyKind::Basic && p.phase == 0;
    let cs = clusters_where(policies, phase0);
    for c in &cs {
        // Basic policies of later phases interfere with the relay.
        if policies
            .iter()
            .any(|p| !phase0(p) && p.kind == PolicyKind::Basic && p.start <= c.end && p.end() >= c.start)
        {
            report.skipped += 1;
            continue;
        }
        report.checked += 1;
        let first = c
            .policies
            .iter()
            .map(|&i| &policies[i])
            .max_by_key(|p| (std::cmp::Reverse(p.start), p.pid))
            .expect("cluster has a policy");
        for &i in &c.policies {
            let p = &policies[i];
            let t = p.start + k - 1;
            let (a, b) = (trace.tau_at(p.pid, t), trace.tau_at(first.pid, t));
            if a != b {
                report.fail(
                    (c.start, c.end),
                    format!("processor {} has {a:?} at {t}, earliest {} has {b:?}", p.pid, first.pid),
                );
            }
        }
    }
    report
}

/// Logical clocks never move backwards.
pub fn check_monotone_clocks(trace: &SimTrace) -> CheckReport {
    let mut report = CheckReport::new("monotone");
    for (i, segs) in trace.tau_segments.iter().enumerate() {
        for w in segs.windows(2) {
            let ((s0, v0), (s1, v1)) = (w[0], w[1]);
            report.checked += 1;
            let carried = v0 + (s1 - s0) as i64;
            if v1 < carried {
                report.fail(
                    (s1, s1),
                    format!("processor {} clock {carried} -> {v1}", ProcessorId::from_index(i)),
                );
            }
        }
    }
    report
}

/// Structural guarantees of Dynamic-Synch within `[0, 2n]`: main parts occupy
/// disjoint windows, every cluster has main-part density at most 1 there,
/// and the queue holder at `2n` holds at least half of all ids.
pub fn check_dynamic(trace: &SimTrace) -> CheckReport {
    let mut report = CheckReport::new("dynamic");
    let n = trace.config.n;
    let m = trace.config.m;
    let horizon = 2 * n;
    let policies = &trace.policies;

    let mut windows: Vec<(Tick, Tick, ProcessorId)> = policies
        .iter()
        .filter(|p| p.kind == PolicyKind::DynMain && p.start <= horizon)
        .map(|p| (p.start, p.end().min(horizon), p.pid))
        .collect();
    windows.sort_unstable();
    report.checked += windows.len();
    for w in windows.windows(2) {
        if w[1].0 <= w[0].1 {
            report.fail(
                (w[0].0, w[1].1),
                format!("main parts of {} and {} overlap", w[0].2, w[1].2),
            );
        }
    }

    for c in clusters(policies).iter().filter(|c| c.start <= horizon) {
        report.checked += 1;
        let b = c.end.min(horizon);
        let stats = interval_stats(&policies_in(policies, c), c.start, b);
        if stats.cden() > Rational64::from_integer(1) {
            report.fail((c.start, c.end), format!("main-part density {} > 1", stats.cden()));
        }
    }

    let mut latest: BTreeMap<ProcessorId, Option<usize>> = BTreeMap::new();
    for s in trace.queue_samples.iter().filter(|s| s.tick <= horizon) {
        latest.insert(s.pid, s.len);
    }
    let held = latest.values().flatten().copied().max();
    report.checked += 1;
    match held {
        Some(len) if 2 * len >= m => {}
        other => report.fail(
            (horizon, horizon),
            format!("queue at {horizon} holds {other:?} of {m} ids"),
        ),
    }
    report
}

fn policies_in(policies: &[ScheduledPolicy], c: &Cluster) -> Vec<ScheduledPolicy> {
    c.policies.iter().map(|&i| policies[i].clone()).collect()
}

/// Named checks accepted by the command line.
pub fn run_check(trace: &SimTrace, name: &str) -> Option<CheckReport> {
    let n = trace.config.n;
    Some(match name {
        "flatten" | "lemma3.4" => check_flatten(trace),
        "continuity" | "lemma3.6" => {
            let (a, b) = match trace.config.algorithm {
                Algorithm::DynamicSynch => (2 * n, 4 * n),
                _ => final_window(trace),
            };
            let mut r = CheckReport::new("continuity");
            r.checked = 1;
            if !check_continuity_in(trace, a, b) {
                r.fail((a, b), "interval is not continuous");
            }
            r
        }
        "containment" | "corollary3.5" => check_cluster_containment(trace),
        "relay" | "lemma3.3" => check_relay(trace),
        "dynamic" | "lemma3.8" => check_dynamic(trace),
        "monotone" => check_monotone_clocks(trace),
        _ => return None,
    })
}

pub const CHECK_NAMES: &[&str] = &[
    "lemma3.3",
    "lemma3.4",
    "corollary3.5",
    "lemma3.6",
    "lemma3.8",
    "monotone",
];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{compute_k, SimConfig, WakeSpec};
    use crate::engine::run;
    use crate::policy::basic_policy;
    use proptest::prelude::*;

    fn basic_at(pid: u32, start: Tick, k: u64) -> ScheduledPolicy {
        ScheduledPolicy {
            pid: ProcessorId(pid),
            start,
            policy: basic_policy(k).unwrap(),
            kind: PolicyKind::Basic,
            phase: 0,
        }
    }

    /// Direct reading of the definition, one tick at a time.
    fn disc_oracle(policies: &[ScheduledPolicy], t: Tick) -> bool {
        let live: Vec<_> = policies.iter().filter(|p| p.start <= t && t <= p.end()).collect();
        live.iter().all(|p| p.end() == t)
    }

    #[test]
    fn empty_schedule_is_all_discontinuity() {
        assert_eq!(discontinuity_points(&[], 10), (0..10).collect::<Vec<_>>());
        assert!(!check_continuity(&[], 0, 1));
    }

    #[test]
    fn single_policy_discontinuity() {
        let p = [basic_at(1, 0, 2)];
        assert!(is_discontinuity(&p, 5));
        for t in 0..5 {
            assert!(!is_discontinuity(&p, t), "tick {t}");
        }
        assert!(is_discontinuity(&p, 6));
    }

    #[test]
    fn overlapping_pair_is_continuous() {
        let p = [basic_at(1, 0, 2), basic_at(2, 3, 2)];
        assert!((1..8).all(|t| !is_discontinuity(&p, t)));
        assert!(is_discontinuity(&p, 8));
        let cs = clusters(&p);
        assert_eq!(cs.len(), 1);
        assert_eq!((cs[0].start, cs[0].end, cs[0].cwet), (0, 8, 12));
        assert_eq!(cs[0].cden(), Rational64::new(12, 9));
    }

    #[test]
    fn adjacent_policies_split() {
        // The first completes at 5 and nothing else is in progress there.
        let p = [basic_at(1, 0, 2), basic_at(2, 6, 2)];
        assert_eq!(clusters(&p).len(), 2);
        assert!(!check_continuity(&p, 0, 11));
        assert!(check_continuity(&p, 6, 11));
    }

    #[test]
    fn phase_zero_weight_in_first_window() {
        for (n, m) in [(64, 8), (200, 10), (1000, 40)] {
            let cfg = SimConfig::with_generator(n, m, Algorithm::Synchronize, WakeSpec::Uniform, 0);
            let trace = run(&cfg).unwrap();
            let k = compute_k(n, m as u64).unwrap();
            let phase0: Vec<_> = trace
                .policies
                .iter()
                .filter(|p| p.kind == PolicyKind::Basic && p.phase == 0)
                .cloned()
                .collect();
            let end = phase0.iter().map(|p| p.end()).max().unwrap();
            let stats = interval_stats(&phase0, 0, end);
            assert!(stats.cwet >= k * k * m as u64);
            assert!(stats.cwet >= 8 * n);
            assert!(stats.cwet >= 4 * (2 * n));
        }
    }

    #[test]
    fn dynamic_clusters_below_unit_density() {
        for seed in 0..20 {
            let cfg = SimConfig::with_generator(300, 12, Algorithm::DynamicSynch, WakeSpec::Random, seed);
            let trace = run(&cfg).unwrap();
            let r = check_dynamic(&trace);
            assert!(r.passed(), "{:?}", r.failures);
        }
    }

    #[test]
    fn dynamic_window_is_continuous() {
        for seed in 0..20 {
            let cfg = SimConfig::with_generator(500, 20, Algorithm::DynamicSynch, WakeSpec::Random, seed);
            let trace = run(&cfg).unwrap();
            assert!(check_continuity_in(&trace, 1000, 2000), "seed {seed}");
        }
    }

    #[test]
    fn synchronize_final_window_uniform() {
        let cfg = SimConfig::with_generator(64, 8, Algorithm::Synchronize, WakeSpec::Uniform, 0);
        let trace = run(&cfg).unwrap();
        let (a, b) = final_window(&trace);
        assert!(check_continuity_in(&trace, a, b));
        assert!(run_check(&trace, "lemma3.4").unwrap().passed());
    }

    #[test]
    fn all_named_checks_resolve() {
        let trace = run(&SimConfig::new(20, Algorithm::Synchronize, vec![0, 5])).unwrap();
        for name in CHECK_NAMES {
            assert!(run_check(&trace, name).is_some(), "{name}");
        }
        assert!(run_check(&trace, "nonsense").is_none());
    }

    fn arb_policies() -> impl Strategy<Value = Vec<ScheduledPolicy>> {
        prop::collection::vec((0u64..60, 1u64..4), 0..6).prop_map(|v| {
            v.into_iter()
                .enumerate()
                .map(|(i, (s, k))| basic_at(i as u32 + 1, s, k))
                .collect()
        })
    }

    proptest! {
        #[test]
        fn discontinuity_matches_definition(p in arb_policies()) {
            let fast = discontinuity_points(&p, 90);
            let slow: Vec<Tick> = (0..90).filter(|&t| disc_oracle(&p, t)).collect();
            prop_assert_eq!(fast, slow);
        }

        #[test]
        fn clusters_match_tick_scan(p in arb_policies()) {
            let fast: Vec<_> = clusters(&p).into_iter().map(|c| (c.start, c.end, c.members)).collect();
            prop_assert_eq!(fast, clusters_by_scan(&p, 90));
        }

        #[test]
        fn interval_weight_is_additive(p in arb_policies(), a in 0u64..80, cut in 0u64..20, len in 0u64..20) {
            let mid = a + cut;
            let b = mid + 1 + len;
            let whole = interval_stats(&p, a, b).cwet;
            let split = interval_stats(&p, a, mid).cwet + interval_stats(&p, mid + 1, b).cwet;
            prop_assert_eq!(whole, split);
        }

        #[test]
        fn cluster_weight_is_sum_of_lengths(p in arb_policies()) {
            let total: u64 = clusters(&p).iter().map(|c| c.cwet).sum();
            prop_assert_eq!(total, p.iter().map(|x| x.policy.len() as u64).sum::<u64>());
        }
    }
}
