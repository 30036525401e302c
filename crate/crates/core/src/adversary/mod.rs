//! Lower-bound constructions: multi-hop topologies, oblivious offset search
//! and budget probes.

mod budget;
mod multi_hop;
mod search;
mod topology;

pub use budget::{budget_curve, BudgetRow, Family, FamilyResult};
pub use multi_hop::{multi_hop_experiment, MultiHopReport};
pub use search::{disjoint, search_non_overlap, OffsetWitness};
pub use topology::{build_topology, two_clique_placement, Graph, TopologyError, TopologySpec};
