//! Baseline runs on multi-hop topologies: energy and per-edge first contact.

use serde::{Deserialize, Serialize};

use crate::config::{Algorithm, ConfigError, SimConfig, Tick, WakeSpec};
use crate::engine::{run_with, EdgeContact, EnergyReport, RunOptions};

use super::TopologySpec;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MultiHopReport {
    pub algorithm: Algorithm,
    pub n: u64,
    pub m: usize,
    pub k: u64,
    pub energy: EnergyReport,
    pub edges: Vec<EdgeContact>,
}

impl MultiHopReport {
    pub fn all_edges_contacted(&self) -> bool {
        self.edges.iter().all(|e| e.first.is_some())
    }

    pub fn last_contact(&self) -> Option<Tick> {
        self.edges.iter().filter_map(|e| e.first).max()
    }
}

/// Run `algorithm` (pairwise or naive) on `topology` with `m` processors.
pub fn multi_hop_experiment(
    topology: TopologySpec,
    m: usize,
    n: u64,
    algorithm: Algorithm,
    wakes: WakeSpec,
    seed: u64,
) -> Result<MultiHopReport, ConfigError> {
    let cfg = SimConfig::with_generator(n, m, algorithm, wakes, seed).with_topology(topology);
    let trace = run_with(&cfg, RunOptions { record_messages: false })?;
    Ok(MultiHopReport {
        algorithm,
        n,
        m,
        k: trace.k,
        energy: trace.report.clone(),
        edges: trace.edge_contacts.clone(),
    })
}
