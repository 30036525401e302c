//! Summary of one run: configuration, energy, clusters per phase and check
//! verdicts. Field order is fixed, so equal runs serialize identically.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{clusters_where, run_check, CheckReport, CHECK_NAMES};
use crate::config::{Algorithm, SimConfig, Tick};
use crate::engine::{EnergyReport, Flag, PolicyKind, SimTrace};

#[derive(Debug, Error, PartialEq, Eq)]
#[error("unknown check {0:?}; known checks: {known}", known = CHECK_NAMES.join(", "))]
pub struct UnknownCheck(pub String);

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub phase: u32,
    pub start: Tick,
    pub end: Tick,
    pub members: usize,
    pub cwet: u64,
    /// Covering density as an exact fraction `"a/b"`.
    pub cden: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckVerdict {
    /// Name as requested.
    pub requested: String,
    pub passed: bool,
    pub report: CheckReport,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: SimConfig,
    pub wakes: Vec<Tick>,
    pub k: u64,
    pub end: Tick,
    pub quiescent: bool,
    pub energy: EnergyReport,
    /// Clocks agree (pairwise: every edge made contact).
    pub completed: bool,
    pub clusters: Vec<ClusterSummary>,
    pub checks: Vec<CheckVerdict>,
    pub flags: Vec<Flag>,
}

impl ExperimentReport {
    pub fn failed_checks(&self) -> impl Iterator<Item = &CheckVerdict> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Clusters of each phase, hand-off and stage-2 ticks left out.
pub fn cluster_summaries(trace: &SimTrace) -> Vec<ClusterSummary> {
    let counted = |k: PolicyKind| !matches!(k, PolicyKind::Stage2 | PolicyKind::DynPass);
    let phases: BTreeSet<u32> = trace.policies.iter().map(|p| p.phase).collect();
    phases
        .into_iter()
        .flat_map(|phase| {
            clusters_where(&trace.policies, |p| p.phase == phase && counted(p.kind))
                .into_iter()
                .map(move |c| ClusterSummary {
                    phase,
                    start: c.start,
                    end: c.end,
                    members: c.members.len(),
                    cwet: c.cwet,
                    cden: c.cden().to_string(),
                })
        })
        .collect()
}

pub fn completed(trace: &SimTrace) -> bool {
    match trace.config.algorithm {
        Algorithm::Pairwise => trace.edge_contacts.iter().all(|e| e.first.is_some()),
        _ => trace.report.sync_complete_tick.is_some(),
    }
}

pub fn experiment_report(trace: &SimTrace, checks: &[String]) -> Result<ExperimentReport, UnknownCheck> {
    let checks = checks
        .iter()
        .map(|name| {
            let report = run_check(trace, name).ok_or_else(|| UnknownCheck(name.clone()))?;
            Ok(CheckVerdict {
                requested: name.clone(),
                passed: report.passed(),
                report,
            })
        })
        .collect::<Result<_, _>>()?;
    Ok(ExperimentReport {
        config: trace.config.clone(),
        wakes: trace.wakes().to_vec(),
        k: trace.k,
        end: trace.end,
        quiescent: trace.quiescent,
        energy: trace.report.clone(),
        completed: completed(trace),
        clusters: cluster_summaries(trace),
        checks,
        flags: trace.flags.clone(),
    })
}
