//! Acceptance criteria 1-10. One PASS/FAIL line per criterion; the test
//! fails if any criterion fails.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::io::Write;
use std::time::{Duration, Instant};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use radiosync::adversary::{budget_curve, multi_hop_experiment, search_non_overlap, Family, TopologySpec};
use radiosync::analysis::{check_dynamic, check_flatten};
use radiosync::config::{ceil_log2, ceil_sqrt, compute_k, Algorithm, ProcessorId, SimConfig, Tick, WakeSpec};
use radiosync::engine::{run_with, RunOptions, SimTrace};
use radiosync::fractional::{random_offsets, run_fractional, FracConfig, IntegerView};
use radiosync::policy::{basic_policy, overlaps, PolicyString};

struct Outcome {
    id: u32,
    pass: bool,
    detail: String,
    elapsed: Duration,
}

/// Running digest of everything a criterion produced.
#[derive(Default)]
struct Digest(DefaultHasher);

impl Digest {
    fn add(&mut self, s: &str) {
        s.hash(&mut self.0);
    }

    fn finish(&self) -> u64 {
        self.0.finish()
    }
}

fn quiet() -> RunOptions {
    RunOptions { record_messages: false }
}

/// Long enough for every algorithm to go quiescent.
fn cap(n: u64, m: usize) -> Tick {
    let k = compute_k(n, m as u64).unwrap();
    (ceil_log2(n) + 2) * (6 * n + 2 * m as u64 * (k * k + k + 1)) + 16
}

fn sweep_configs() -> Vec<(u64, Vec<Tick>)> {
    let mut configs = Vec::new();
    for n in 1..=12u64 {
        for m in 1..=4u32 {
            for c in 0..(n + 1).pow(m - 1) {
                let mut w = vec![0];
                let mut x = c;
                for _ in 1..m {
                    w.push(x % (n + 1));
                    x /= n + 1;
                }
                configs.push((n, w));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..500 {
        let n = rng.gen_range(1..=1024u64);
        let m = rng.gen_range(1..=64usize);
        configs.push((n, (0..m).map(|_| rng.gen_range(0..=n)).collect()));
    }
    configs
}

/// All clocks agree on every tick in `from..`, given the trace ran until
/// quiescence. Clocks move at slope one between jumps, so agreement at
/// `from` and at every later jump is enough.
fn clocks_agree_from(trace: &SimTrace, from: Tick) -> bool {
    if !trace.quiescent {
        return false;
    }
    let m = trace.tau_segments.len();
    let from = from.min(trace.end.saturating_sub(1));
    let mut probes: Vec<Tick> = trace
        .tau_segments
        .iter()
        .flatten()
        .map(|&(t, _)| t)
        .filter(|&t| t >= from)
        .collect();
    probes.push(from);
    probes.into_iter().all(|t| {
        let first = trace.tau_at(ProcessorId::from_index(0), t);
        first.is_some() && (1..m).all(|i| trace.tau_at(ProcessorId::from_index(i), t) == first)
    })
}

/// Radio-on count per processor, counted from the radio log.
fn radio_counts(trace: &SimTrace) -> Vec<u64> {
    let mut counts = vec![0u64; trace.tau_segments.len()];
    for (_, on) in &trace.radio {
        for p in on {
            counts[p.index()] += 1;
        }
    }
    counts
}

fn criterion_1(d: &mut Digest) -> Outcome {
    let start = Instant::now();
    let mut bad = Vec::new();
    for k in 1..=12u64 {
        let p = basic_policy(k).unwrap();
        let len = k * k + k;
        for off in 0..len {
            if !overlaps(&p, 0, &p, off) {
                bad.push(format!("k={k} d={off} no overlap"));
            }
        }
        if overlaps(&p, 0, &p, len) {
            bad.push(format!("k={k} d={len} overlaps"));
        }
        d.add(&format!("{k}:{}", bad.len()));
    }
    let elapsed = start.elapsed();
    Outcome {
        id: 1,
        pass: bad.is_empty() && elapsed < Duration::from_secs(1),
        detail: format!("k in 1..=12, {} violations {:?}", bad.len(), bad.first()),
        elapsed,
    }
}

struct SyncSweep {
    c2: Outcome,
    c3: Outcome,
    c6: Outcome,
}

fn sync_sweep(configs: &[(u64, Vec<Tick>)], d: &mut Digest) -> SyncSweep {
    let start = Instant::now();
    let (mut late, mut over, mut flat_fail, mut flat_checked) = (Vec::new(), Vec::new(), Vec::new(), 0usize);
    let mut worst_ratio = (0u64, 1u64);
    for (n, w) in configs {
        let (n, m) = (*n, w.len());
        let k = compute_k(n, m as u64).unwrap();
        let l = ceil_log2(n);
        let cfg = SimConfig::new(n, Algorithm::Synchronize, w.clone()).with_max_ticks(cap(n, m));
        let trace = run_with(&cfg, quiet()).unwrap();
        d.add(&trace.to_json());
        if !clocks_agree_from(&trace, l * 4 * n + 2 * n + k * k + k) {
            late.push((n, w.clone()));
        }
        let budget = (2 * k + 1) * (l + 1);
        let max = radio_counts(&trace).into_iter().max().unwrap();
        if max > budget {
            over.push((n, w.clone(), max, budget));
        }
        if max * worst_ratio.1 > worst_ratio.0 * budget {
            worst_ratio = (max, budget);
        }
        let f = check_flatten(&trace);
        flat_checked += f.checked;
        if !f.passed() {
            flat_fail.push((n, w.clone(), f.failures[0].what.clone()));
        }
    }
    let elapsed = start.elapsed();
    SyncSweep {
        c2: Outcome {
            id: 2,
            pass: late.is_empty() && elapsed < Duration::from_secs(300),
            detail: format!(
                "{} wake vectors, {} not synchronized in time {:?}",
                configs.len(),
                late.len(),
                late.first()
            ),
            elapsed,
        },
        c3: Outcome {
            id: 3,
            pass: over.is_empty(),
            detail: format!(
                "{} over (2k+1)(L+1), tightest {}/{} {:?}",
                over.len(),
                worst_ratio.0,
                worst_ratio.1,
                over.first()
            ),
            elapsed: Duration::ZERO,
        },
        c6: Outcome {
            id: 6,
            pass: flat_fail.is_empty(),
            detail: format!(
                "{flat_checked} flatten conditions checked, {} traces failing {:?}",
                flat_fail.len(),
                flat_fail.first()
            ),
            elapsed: Duration::ZERO,
        },
    }
}

fn dynamic_sweep(configs: &[(u64, Vec<Tick>)], d: &mut Digest) -> (Outcome, Outcome) {
    let start = Instant::now();
    let (mut late, mut over, mut suite_fail, mut suite_checked) = (Vec::new(), Vec::new(), Vec::new(), 0usize);
    for (n, w) in configs {
        let (n, m) = (*n, w.len());
        let k = compute_k(n, m as u64).unwrap();
        let cfg = SimConfig::new(n, Algorithm::DynamicSynch, w.clone()).with_max_ticks(cap(n, m));
        let trace = run_with(&cfg, quiet()).unwrap();
        d.add(&trace.to_json());
        if !clocks_agree_from(&trace, 4 * n + k * k + k + 1) {
            late.push((n, w.clone()));
        }
        let max = radio_counts(&trace).into_iter().max().unwrap();
        if max > 4 * k + 2 {
            over.push((n, w.clone(), max, 4 * k + 2));
        }
        let s = check_dynamic(&trace);
        suite_checked += s.checked;
        if !s.passed() {
            suite_fail.push((n, w.clone(), s.failures[0].what.clone()));
        }
    }
    let elapsed = start.elapsed();
    (
        Outcome {
            id: 4,
            pass: late.is_empty() && over.is_empty(),
            detail: format!(
                "{} wake vectors, {} late, {} over 4k+2 {:?} {:?}",
                configs.len(),
                late.len(),
                over.len(),
                late.first(),
                over.first()
            ),
            elapsed,
        },
        Outcome {
            id: 5,
            pass: suite_fail.is_empty(),
            detail: format!(
                "{suite_checked} conditions checked, {} traces failing {:?}",
                suite_fail.len(),
                suite_fail.first()
            ),
            elapsed: Duration::ZERO,
        },
    )
}

fn criterion_7(d: &mut Digest) -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut unsynced, mut wide, mut mismatched) = (Vec::new(), Vec::new(), Vec::new());
    let mut max_spread = 0;
    for seed in 0..200u64 {
        let n = rng.gen_range(1..=256u64);
        let m = rng.gen_range(1..=16usize);
        let offsets = random_offsets(n, m, 12, seed);
        for alg in [Algorithm::Naive, Algorithm::ClusterSynch, Algorithm::Synchronize] {
            let t = run_fractional(&FracConfig::new(n, alg, offsets.clone())).unwrap();
            d.add(&serde_json::to_string(&t).unwrap());
            if !t.synchronized() {
                unsynced.push((seed, alg));
            }
            let spread = t.displayed_spread();
            max_spread = max_spread.max(spread);
            if spread > 1 {
                wide.push((seed, alg, spread));
            }
        }
        let integral = random_offsets(n, m, 1, seed);
        for alg in [
            Algorithm::Naive,
            Algorithm::Pairwise,
            Algorithm::ClusterSynch,
            Algorithm::Synchronize,
        ] {
            let frac = run_fractional(&FracConfig::new(n, alg, integral.clone())).unwrap();
            let wakes: Vec<Tick> = integral.iter().map(|w| w.to_integer() as Tick).collect();
            let int = run_with(&SimConfig::new(n, alg, wakes), quiet()).unwrap();
            d.add(&int.to_json());
            if frac.integer_view() != Some(IntegerView::from_trace(&int)) {
                mismatched.push((seed, alg));
            }
        }
    }
    Outcome {
        id: 7,
        pass: unsynced.is_empty() && wide.is_empty() && mismatched.is_empty(),
        detail: format!(
            "200 rational vectors x 3 algorithms: {} unsynchronized, max spread {max_spread}; \
             200 integral vectors x 4 algorithms: {} not bit-exact {:?} {:?}",
            unsynced.len(),
            mismatched.len(),
            unsynced.first(),
            mismatched.first()
        ),
        elapsed: start.elapsed(),
    }
}

fn criterion_8(d: &mut Digest) -> Outcome {
    let start = Instant::now();
    let mut bad = Vec::new();
    for s in ["11", "101", "1001", "110000001"] {
        let p = PolicyString::parse(s, 0).unwrap();
        let w = search_non_overlap(&[p.clone(), p], 9);
        d.add(&format!("{s}:{w:?}"));
        if !w.is_some_and(|w| w.certified) {
            bad.push(format!("no witness for {s} at n=9"));
        }
    }
    let found: Vec<u64> = (1..=200u64)
        .filter(|&n| {
            let p = basic_policy(ceil_sqrt(n)).unwrap();
            search_non_overlap(&[p.clone(), p], n).is_some()
        })
        .collect();
    if !found.is_empty() {
        bad.push(format!("basic policies defeated at n={found:?}"));
    }
    let curve = budget_curve(100, 20);
    d.add(&serde_json::to_string(&curve).unwrap());
    if !curve[..3].iter().all(|r| r.all_defeated()) {
        bad.push("some shape safe at c <= 3".into());
    }
    if !curve[19].safe(Family::BasicTruncation) {
        bad.push("truncated basic policy defeated at c = 20".into());
    }
    let elapsed = start.elapsed();
    Outcome {
        id: 8,
        pass: bad.is_empty() && elapsed < Duration::from_secs(60),
        detail: format!("{} problems {:?}", bad.len(), bad),
        elapsed,
    }
}

fn criterion_9(d: &mut Digest) -> Outcome {
    let start = Instant::now();
    let expected = 8 * 2 * ceil_sqrt(64);
    let mut bad = Vec::new();
    for wakes in [WakeSpec::Uniform, WakeSpec::Random, WakeSpec::Clustered] {
        for seed in 0..5 {
            let r =
                multi_hop_experiment(TopologySpec::TwoClique, 8, 64, Algorithm::Pairwise, wakes.clone(), seed).unwrap();
            d.add(&serde_json::to_string(&r).unwrap());
            if r.energy.sum != expected || r.edges.len() != 13 || !r.all_edges_contacted() {
                bad.push((wakes.clone(), seed, r.energy.sum, r.edges.len()));
            }
        }
    }
    Outcome {
        id: 9,
        pass: bad.is_empty(),
        detail: format!(
            "15 runs, total {expected} ticks expected, {} failing {:?}",
            bad.len(),
            bad.first()
        ),
        elapsed: start.elapsed(),
    }
}

/// Runs criteria 1-9 once; returns outcomes and the digest of each.
fn run_all(configs: &[(u64, Vec<Tick>)]) -> (Vec<Outcome>, Vec<u64>) {
    let mut outcomes = Vec::new();
    let mut digests = Vec::new();
    let mut step = |f: &mut dyn FnMut(&mut Digest) -> Vec<Outcome>| {
        let mut d = Digest::default();
        outcomes.extend(f(&mut d));
        digests.push(d.finish());
    };
    step(&mut |d| vec![criterion_1(d)]);
    step(&mut |d| {
        let s = sync_sweep(configs, d);
        vec![s.c2, s.c3, s.c6]
    });
    step(&mut |d| {
        let (c4, c5) = dynamic_sweep(configs, d);
        vec![c4, c5]
    });
    step(&mut |d| vec![criterion_7(d)]);
    step(&mut |d| vec![criterion_8(d)]);
    step(&mut |d| vec![criterion_9(d)]);
    outcomes.sort_by_key(|o| o.id);
    (outcomes, digests)
}

#[test]
fn acceptance() {
    let configs = sweep_configs();
    let (mut outcomes, first) = run_all(&configs);
    let start = Instant::now();
    let (_, second) = run_all(&configs);
    outcomes.push(Outcome {
        id: 10,
        pass: first == second,
        detail: format!(
            "{} experiment groups re-run, digests {}",
            first.len(),
            if first == second { "identical" } else { "differ" }
        ),
        elapsed: start.elapsed(),
    });
    // Straight to stdout so the lines show without --nocapture.
    let mut stdout = std::io::stdout().lock();
    for o in &outcomes {
        writeln!(
            stdout,
            "criterion {:>2}: {}  {} ({:.2} s)",
            o.id,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            o.elapsed.as_secs_f64()
        )
        .unwrap();
    }
    let failed: Vec<u32> = outcomes.iter().filter(|o| !o.pass).map(|o| o.id).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
