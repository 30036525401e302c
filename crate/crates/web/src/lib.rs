//! Browser bindings: run a simulation, scan two k-basic policies over all
//! offsets, search offsets that keep schedules apart. Each returns JSON.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use radiosync::adversary::{search_non_overlap, OffsetWitness};
use radiosync::config::{Algorithm, SimConfig, Tick, WakeSpec};
use radiosync::engine::{run_with, RunOptions};
use radiosync::policy::{basic_policy, first_overlap, PolicyString};
use radiosync::report::cluster_summaries;

/// Largest run the page accepts; keeps the timeline drawable.
const MAX_N: u64 = 4096;
const MAX_M: usize = 128;

#[derive(Serialize)]
pub struct Timeline {
    pub k: u64,
    pub end: Tick,
    pub wakes: Vec<Tick>,
    pub energy: Vec<u64>,
    pub sync_tick: Option<Tick>,
    /// Per processor, the ticks its radio was on.
    pub on_ticks: Vec<Vec<Tick>>,
    /// Per processor, `(tick, tau)` at every clock jump.
    pub clock_jumps: Vec<Vec<(Tick, i64)>>,
    pub clusters: Vec<(u32, Tick, Tick, usize)>,
}

pub fn simulate_json(algorithm: &str, n: u64, m: usize, wake: &str, seed: u64) -> Result<String, String> {
    if n > MAX_N || m > MAX_M {
        return Err(format!("the demo is limited to n ≤ {MAX_N} and m ≤ {MAX_M}"));
    }
    let algorithm: Algorithm = algorithm.parse().map_err(|e| format!("{e}"))?;
    let wakes = match wake {
        "uniform" => WakeSpec::Uniform,
        "random" => WakeSpec::Random,
        "clustered" => WakeSpec::Clustered,
        other => return Err(format!("unknown wake pattern {other:?}")),
    };
    let cfg = SimConfig::with_generator(n, m, algorithm, wakes, seed);
    let trace = run_with(&cfg, RunOptions { record_messages: false }).map_err(|e| e.to_string())?;
    let mut on_ticks = vec![Vec::new(); m];
    for (t, on) in &trace.radio {
        for p in on {
            on_ticks[p.index()].push(*t);
        }
    }
    let timeline = Timeline {
        k: trace.k,
        end: trace.end,
        wakes: trace.wakes().to_vec(),
        energy: trace.report.per_processor.clone(),
        sync_tick: trace.report.sync_complete_tick,
        on_ticks,
        clock_jumps: trace.tau_segments.clone(),
        clusters: cluster_summaries(&trace)
            .into_iter()
            .map(|c| (c.phase, c.start, c.end, c.members))
            .collect(),
    };
    Ok(serde_json::to_string(&timeline).expect("timeline serializes"))
}

#[derive(Serialize)]
pub struct OverlapScan {
    pub k: u64,
    pub len: u64,
    /// For offsets `0..=len`, the first common on-tick, if any.
    pub first_common: Vec<Option<Tick>>,
}

pub fn overlap_scan_json(k: u64) -> Result<String, String> {
    if !(1..=64).contains(&k) {
        return Err("k must be in 1..=64".into());
    }
    let p = basic_policy(k).map_err(|e| e.to_string())?;
    let len = p.len() as Tick;
    let scan = OverlapScan {
        k,
        len,
        first_common: (0..=len).map(|d| first_overlap(&p, 0, &p, d)).collect(),
    };
    Ok(serde_json::to_string(&scan).expect("scan serializes"))
}

#[derive(Serialize)]
pub struct SearchResult {
    pub witness: Option<OffsetWitness>,
}

/// `schedules` is a comma-separated list of 0/1 strings.
pub fn search_json(schedules: &str, n: Tick) -> Result<String, String> {
    if n > 2000 {
        return Err("the demo is limited to n ≤ 2000".into());
    }
    let parsed: Vec<PolicyString> = schedules
        .split(',')
        .map(|s| PolicyString::parse(s.trim(), 0).ok_or_else(|| format!("{s:?} is not a 0/1 schedule")))
        .collect::<Result<_, _>>()?;
    if parsed.len() < 2 {
        return Err("give at least two schedules".into());
    }
    let result = SearchResult {
        witness: search_non_overlap(&parsed, n),
    };
    Ok(serde_json::to_string(&result).expect("result serializes"))
}

#[wasm_bindgen]
pub fn simulate(algorithm: &str, n: u32, m: u32, wake: &str, seed: u32) -> Result<String, JsValue> {
    simulate_json(algorithm, n.into(), m as usize, wake, seed.into()).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn overlap_scan(k: u32) -> Result<String, JsValue> {
    overlap_scan_json(k.into()).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn search(schedules: &str, n: u32) -> Result<String, JsValue> {
    search_json(schedules, n.into()).map_err(|e| JsValue::from_str(&e))
}
