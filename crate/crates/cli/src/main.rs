//! `radiosync`: run one experiment, sweep a grid, or probe the lower-bound
//! constructions.
//!
//! Exit codes: 0 success, 1 a requested check failed or the run did not
//! complete, 2 bad configuration or input.

mod input;
mod output;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use radiosync::adversary::{budget_curve, multi_hop_experiment, search_non_overlap, OffsetWitness};
use radiosync::config::{expand_wakes, Algorithm, SimConfig, Tick, WakeSpec};
use radiosync::engine::{run_with, RunOptions};
use radiosync::fractional::{random_offsets, run_fractional, FracConfig};
use radiosync::policy::{basic_policy, first_overlap, PolicyString};
use radiosync::report::experiment_report;

use input::{TopologyArg, WakeArg};
use output::{write_sweep_csv, write_trace_csv, FracReport, SweepRow};

#[derive(Debug, Parser)]
#[command(
    name = "radiosync",
    version,
    about = "Energy-bounded clock synchronization simulator"
)]
#[command(args_conflicts_with_subcommands = true, subcommand_negates_reqs = true)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Energy and sync tick over an (n, m) grid, as CSV.
    Sweep(SweepArgs),
    /// Search wake offsets that keep schedules from ever overlapping (JSON).
    Search(SearchArgs),
    /// Smallest radio budget at which fixed schedule shapes become safe (JSON).
    Budget(BudgetArgs),
    /// Energy and per-edge first contact of a baseline on a multi-hop graph (JSON).
    MultiHop(MultiHopArgs),
    /// Smallest offset at which two k-basic policies stop overlapping (JSON).
    Overlap(OverlapArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// synchronize, dynamic, naive, pairwise or cluster.
    #[arg(long, default_value = "synchronize")]
    algorithm: Algorithm,
    /// Uncertainty window: every wake tick lies in 0..=n.
    #[arg(long, required = true)]
    n: Option<u64>,
    /// Processor count; taken from the file with --wake explicit:FILE.
    #[arg(long)]
    m: Option<usize>,
    /// uniform, random, clustered or explicit:FILE (one wake per line).
    #[arg(long, default_value = "uniform")]
    wake: WakeArg,
    /// Seed for --wake random.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// complete, two-clique, unit-disk-two-clique, l-connected:L,
    /// unit-disk:FILE (`radius R` then `x y` lines) or edges:FILE (`u v`
    /// lines, 1-based).
    #[arg(long, default_value = "complete")]
    topology: TopologyArg,
    /// Override the policy parameter k.
    #[arg(long)]
    k: Option<u64>,
    /// Simulate ticks 0..MAX_TICKS instead of the algorithm's default horizon.
    #[arg(long)]
    max_ticks: Option<Tick>,
    /// Rational wake offsets ("p/q" lines in explicit files).
    #[arg(long)]
    fractional: bool,
    /// Largest denominator drawn by --wake random in fractional mode.
    #[arg(long, default_value_t = 12, requires = "fractional")]
    max_den: i64,
    /// Comma-separated checks: lemma3.3, lemma3.4, corollary3.5, lemma3.6,
    /// lemma3.8, monotone (aliases relay, flatten, containment, continuity,
    /// dynamic).
    #[arg(long, value_delimiter = ',')]
    check: Vec<String>,
    /// Per-tick CSV: tick, radio-on ids, clock of each processor.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// JSON report path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// Comma-separated algorithms.
    #[arg(long, value_delimiter = ',', default_value = "synchronize")]
    algorithm: Vec<Algorithm>,
    /// Comma-separated window sizes.
    #[arg(long, value_delimiter = ',', required = true)]
    n: Vec<u64>,
    /// Comma-separated processor counts.
    #[arg(long, value_delimiter = ',', required = true)]
    m: Vec<usize>,
    /// uniform, random or clustered.
    #[arg(long, default_value = "uniform")]
    wake: WakeArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SearchArgs {
    /// A 0/1 schedule; give at least two.
    #[arg(long = "schedule", required = true, num_args = 1)]
    schedules: Vec<String>,
    /// Offsets range over 0..=n.
    #[arg(long)]
    n: Tick,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BudgetArgs {
    #[arg(long)]
    n: Tick,
    /// Largest budget probed.
    #[arg(long, default_value_t = 20)]
    c_max: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct MultiHopArgs {
    /// naive or pairwise.
    #[arg(long, default_value = "pairwise")]
    algorithm: Algorithm,
    #[arg(long, default_value = "two-clique")]
    topology: TopologyArg,
    #[arg(long)]
    n: u64,
    #[arg(long)]
    m: usize,
    /// uniform, random or clustered.
    #[arg(long, default_value = "uniform")]
    wake: WakeArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct OverlapArgs {
    /// Probe k = 1..=K_MAX.
    #[arg(long, default_value_t = 12)]
    k_max: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Result of a command that ran to the end.
struct Verdict {
    problems: Vec<String>,
}

impl Verdict {
    fn ok() -> Self {
        Verdict { problems: Vec::new() }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        None => run_experiment(&cli.run),
        Some(Command::Sweep(a)) => sweep(&a),
        Some(Command::Search(a)) => search(&a),
        Some(Command::Budget(a)) => budget(&a),
        Some(Command::MultiHop(a)) => multi_hop(&a),
        Some(Command::Overlap(a)) => overlap(&a),
    };
    match result {
        Ok(v) if v.problems.is_empty() => ExitCode::SUCCESS,
        Ok(v) => {
            for p in v.problems {
                eprintln!("failed: {p}");
            }
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn emit_json(value: &impl Serialize, path: Option<&Path>) -> Result<()> {
    let mut w = sink(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn run_experiment(a: &RunArgs) -> Result<Verdict> {
    let n = a.n.expect("clap enforces --n");
    let generated_m = match &a.wake {
        WakeArg::Explicit(_) => None,
        _ => Some(a.m.context("--m is required unless wakes come from explicit:FILE")?),
    };
    if a.fractional {
        return run_fractional_experiment(a, n, generated_m);
    }
    let wakes = a.wake.spec()?;
    let m = match (&wakes, generated_m) {
        (WakeSpec::Explicit(w), _) => w.len(),
        (_, m) => m.expect("generator"),
    };
    if let Some(given) = a.m.filter(|&g| g != m) {
        bail!("--m {given} but the wake file lists {m} processors");
    }
    let mut cfg = SimConfig::with_generator(n, m, a.algorithm, wakes, a.seed).with_topology(a.topology.spec()?);
    cfg.k_override = a.k;
    cfg.max_ticks = a.max_ticks;
    let trace = run_with(&cfg, RunOptions { record_messages: false })?;
    let report = experiment_report(&trace, &a.check)?;
    if let Some(path) = &a.trace {
        let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
        write_trace_csv(&trace, BufWriter::new(file))?;
    }
    emit_json(&report, a.out.as_deref())?;
    let mut problems: Vec<String> = report
        .failed_checks()
        .map(|c| match c.report.failures.first() {
            Some(f) => format!(
                "check {} ({}) on [{}, {}]: {}",
                c.requested, c.report.name, f.interval.0, f.interval.1, f.what
            ),
            None => format!("check {} ({})", c.requested, c.report.name),
        })
        .collect();
    if !report.completed {
        problems.push(match a.algorithm {
            Algorithm::Pairwise => "some edge never made contact".to_string(),
            _ => format!("clocks still differ at tick {}", report.end),
        });
    }
    Ok(Verdict { problems })
}

fn run_fractional_experiment(a: &RunArgs, n: u64, m: Option<usize>) -> Result<Verdict> {
    if !a.check.is_empty() {
        bail!("--check needs the integer engine; drop --fractional");
    }
    if a.trace.is_some() {
        bail!("--trace is not available with --fractional");
    }
    if a.algorithm == Algorithm::Pairwise {
        bail!("pairwise has no fractional completion criterion");
    }
    if a.max_den < 1 {
        bail!("--max-den must be ≥ 1");
    }
    let wakes = match (a.wake.rational_file()?, &a.wake) {
        (Some(w), _) => w,
        (None, WakeArg::Random) => random_offsets(n, m.expect("generator"), a.max_den, a.seed),
        (None, generator) => expand_wakes(&generator.spec()?, n, m.expect("generator"), a.seed)
            .into_iter()
            .map(|w| (w as i64).into())
            .collect(),
    };
    if let Some(given) = a.m.filter(|&g| g != wakes.len()) {
        bail!("--m {given} but the wake file lists {} processors", wakes.len());
    }
    let mut cfg = FracConfig::new(n, a.algorithm, wakes);
    cfg.base.topology = a.topology.spec()?;
    cfg.base.k_override = a.k;
    cfg.base.max_ticks = a.max_ticks;
    let trace = run_fractional(&cfg)?;
    let report = FracReport::new(&trace);
    emit_json(&report, a.out.as_deref())?;
    let mut v = Verdict::ok();
    if !report.completed {
        v.problems.push("exact clocks still differ".into());
    }
    if report.displayed_spread > 1 {
        v.problems
            .push(format!("displayed clocks differ by {}", report.displayed_spread));
    }
    Ok(v)
}

fn sweep(a: &SweepArgs) -> Result<Verdict> {
    let wakes = match a.wake {
        WakeArg::Explicit(_) => bail!("sweep takes uniform, random or clustered wakes"),
        ref g => g.spec()?,
    };
    let mut rows = Vec::new();
    for &algorithm in &a.algorithm {
        for &n in &a.n {
            for &m in &a.m {
                let cfg = SimConfig::with_generator(n, m, algorithm, wakes.clone(), a.seed);
                let trace = run_with(&cfg, RunOptions { record_messages: false })
                    .with_context(|| format!("{algorithm} n = {n} m = {m}"))?;
                rows.push(SweepRow {
                    n,
                    m,
                    k: trace.k,
                    algorithm,
                    max_energy: trace.report.max,
                    total_energy: trace.report.sum,
                    sync_tick: trace.report.sync_complete_tick,
                });
            }
        }
    }
    write_sweep_csv(&rows, sink(a.out.as_deref())?)?;
    Ok(Verdict::ok())
}

#[derive(Serialize)]
struct SearchOutput {
    n: Tick,
    schedules: Vec<String>,
    witness: Option<OffsetWitness>,
}

fn search(a: &SearchArgs) -> Result<Verdict> {
    if a.schedules.len() < 2 {
        bail!("give at least two --schedule values");
    }
    let schedules = a
        .schedules
        .iter()
        .map(|s| PolicyString::parse(s, 0).with_context(|| format!("schedule {s:?} is not a non-empty 0/1 string")))
        .collect::<Result<Vec<_>>>()?;
    let out = SearchOutput {
        n: a.n,
        schedules: a.schedules.clone(),
        witness: search_non_overlap(&schedules, a.n),
    };
    emit_json(&out, a.out.as_deref())?;
    Ok(Verdict::ok())
}

fn budget(a: &BudgetArgs) -> Result<Verdict> {
    if a.c_max == 0 {
        bail!("--c-max must be ≥ 1");
    }
    emit_json(&budget_curve(a.n, a.c_max), a.out.as_deref())?;
    Ok(Verdict::ok())
}

fn multi_hop(a: &MultiHopArgs) -> Result<Verdict> {
    if !matches!(a.algorithm, Algorithm::Naive | Algorithm::Pairwise) {
        bail!("multi-hop runs naive or pairwise, not {}", a.algorithm);
    }
    let wakes = match a.wake {
        WakeArg::Explicit(_) => bail!("multi-hop takes uniform, random or clustered wakes"),
        ref g => g.spec()?,
    };
    let report = multi_hop_experiment(a.topology.spec()?, a.m, a.n, a.algorithm, wakes, a.seed)?;
    emit_json(&report, a.out.as_deref())?;
    Ok(Verdict::ok())
}

#[derive(Serialize)]
struct OverlapRow {
    k: u64,
    len: u64,
    /// Smallest offset with no common on-tick.
    first_disjoint: Tick,
}

fn overlap(a: &OverlapArgs) -> Result<Verdict> {
    if a.k_max == 0 {
        bail!("--k-max must be ≥ 1");
    }
    let rows: Vec<OverlapRow> = (1..=a.k_max)
        .map(|k| {
            let p = basic_policy(k).expect("k ≥ 1");
            let first_disjoint = (0..)
                .find(|&d| first_overlap(&p, 0, &p, d).is_none())
                .expect("finite policy");
            OverlapRow {
                k,
                len: p.len() as u64,
                first_disjoint,
            }
        })
        .collect();
    emit_json(&rows, a.out.as_deref())?;
    Ok(Verdict::ok())
}
