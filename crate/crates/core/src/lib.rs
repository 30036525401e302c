//! Deterministic discrete-time simulation of energy-aware wireless clock
//! synchronization.
//!
//! `m` processors wake at arbitrary ticks inside a window of `n` ticks and
//! duty-cycle their radios according to fixed bit-string policies. The engine
//! delivers messages only between processors whose radios are on in the same
//! tick, accounts every radio-on tick, and records a trace from which the
//! [`analysis`] module recomputes clusters, covering densities and the
//! structural properties the protocols are supposed to guarantee.
//!
//! Module map:
//!
//! | module        | contents                                                     |
//! |---------------|--------------------------------------------------------------|
//! | [`config`]    | shared types, config validation, the `k` parameter           |
//! | [`policy`]    | radio-use policy strings, k-basic and naive policies         |
//! | [`engine`]    | tick loop, message delivery, traces, energy accounting       |
//! | [`protocols`] | Early-Sync, Synchronize, Dynamic-Synch, naive and pairwise   |
//! | [`analysis`]  | discontinuity points, clusters, lemma checkers               |
//! | [`fractional`]| non-integer wake offsets with half-unit phase bookkeeping    |
//! | [`adversary`] | lower-bound topologies, offset search, budget probes         |
//! | [`report`]    | run summaries shared by the CLI and the web demo             |

pub mod adversary;
pub mod analysis;
pub mod config;
pub mod engine;
pub mod fractional;
pub mod policy;
pub mod protocols;
pub mod report;

pub use config::{
    ceil_log2, compute_k, validate_config, Algorithm, ConfigError, ProcessorId, SimConfig, Tick, WakeSpec,
};
pub use engine::{energy, run, EnergyReport, SimTrace};
pub use policy::{basic_policy, naive_policy, overlaps, PolicyString};
