//! Shared domain types and configuration validation.

use std::fmt;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::{build_topology, Graph, TopologyError, TopologySpec};

/// One discrete communication round. Global or local depending on context;
/// local tick = global tick - wake tick of the owning processor.
pub type Tick = u64;

/// Processor identity, `1..=m`. The total order on ids breaks every tie.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProcessorId(pub u32);

impl ProcessorId {
    /// Zero-based slot of this processor in per-processor vectors.
    pub fn index(self) -> usize {
        self.0 as usize - 1
    }

    pub fn from_index(i: usize) -> Self {
        ProcessorId(i as u32 + 1)
    }
}

impl fmt::Display for ProcessorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// How wake ticks are produced.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "ticks")]
pub enum WakeSpec {
    /// `floor((i-1) * n / (m-1))` for processor `i`.
    Uniform,
    /// Seeded uniform draw over `0..=n`, then normalized.
    Random,
    /// `ceil(m/2)` processors at 0, the rest at `n`.
    Clustered,
    Explicit(Vec<Tick>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Synchronize,
    #[serde(rename = "dynamic")]
    DynamicSynch,
    Naive,
    Pairwise,
    /// A single Cluster-Synch at wake with no flattening phases.
    #[serde(rename = "cluster")]
    ClusterSynch,
}

impl Algorithm {
    /// Single-hop algorithms are only defined on the complete graph.
    pub fn requires_complete_graph(self) -> bool {
        matches!(
            self,
            Algorithm::Synchronize | Algorithm::DynamicSynch | Algorithm::ClusterSynch
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Synchronize => "synchronize",
            Algorithm::DynamicSynch => "dynamic",
            Algorithm::Naive => "naive",
            Algorithm::Pairwise => "pairwise",
            Algorithm::ClusterSynch => "cluster",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "synchronize" => Ok(Algorithm::Synchronize),
            "dynamic" | "dynamic-synch" => Ok(Algorithm::DynamicSynch),
            "naive" => Ok(Algorithm::Naive),
            "pairwise" => Ok(Algorithm::Pairwise),
            "cluster" | "cluster-synch" => Ok(Algorithm::ClusterSynch),
            other => Err(ConfigError::UnknownAlgorithm(other.to_string())),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Uncertainty window: every wake tick lies in `0..=n`.
    pub n: u64,
    /// Processor count.
    pub m: usize,
    pub wakes: WakeSpec,
    pub topology: TopologySpec,
    pub algorithm: Algorithm,
    pub k_override: Option<u64>,
    /// Simulation horizon; derived from the algorithm when absent.
    pub max_ticks: Option<Tick>,
    pub seed: u64,
}

impl SimConfig {
    /// Complete graph, explicit wakes; the shape most tests want.
    pub fn new(n: u64, algorithm: Algorithm, wakes: Vec<Tick>) -> Self {
        SimConfig {
            n,
            m: wakes.len(),
            wakes: WakeSpec::Explicit(wakes),
            topology: TopologySpec::Complete,
            algorithm,
            k_override: None,
            max_ticks: None,
            seed: 0,
        }
    }

    pub fn with_generator(n: u64, m: usize, algorithm: Algorithm, wakes: WakeSpec, seed: u64) -> Self {
        SimConfig {
            n,
            m,
            wakes,
            topology: TopologySpec::Complete,
            algorithm,
            k_override: None,
            max_ticks: None,
            seed,
        }
    }

    pub fn with_topology(mut self, topology: TopologySpec) -> Self {
        self.topology = topology;
        self
    }

    pub fn with_k(mut self, k: u64) -> Self {
        self.k_override = Some(k);
        self
    }

    pub fn with_max_ticks(mut self, max_ticks: Tick) -> Self {
        self.max_ticks = Some(max_ticks);
        self
    }

    /// The explicit wake list. Only meaningful on a validated config.
    pub fn wake_ticks(&self) -> &[Tick] {
        match &self.wakes {
            WakeSpec::Explicit(w) => w,
            _ => &[],
        }
    }

    /// The policy parameter this configuration runs with.
    pub fn effective_k(&self) -> u64 {
        if let Some(k) = self.k_override {
            return k;
        }
        match self.algorithm {
            Algorithm::Pairwise => ceil_sqrt(self.n),
            _ => compute_k(self.n, self.m as u64).unwrap_or(1),
        }
    }

    /// Default horizon: the completion guarantee of each algorithm plus one
    /// policy length of slack.
    pub fn default_horizon(&self) -> Tick {
        let n = self.n;
        let k = self.effective_k();
        let basic = k * k + k;
        match self.algorithm {
            Algorithm::Synchronize => ceil_log2(n) * 4 * n + 2 * n + basic + 1,
            Algorithm::ClusterSynch => 2 * n + basic + 1,
            Algorithm::DynamicSynch => 4 * n + basic + 2,
            Algorithm::Naive => 2 * n + (n + 1),
            Algorithm::Pairwise => 2 * n + basic,
        }
    }

    pub fn horizon(&self) -> Tick {
        self.max_ticks.unwrap_or_else(|| self.default_horizon())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConfigError {
    #[error("n must be ≥ 1")]
    ZeroWindow,
    #[error("m must be ≥ 1")]
    NoProcessors,
    #[error("expected {expected} wake ticks, got {got}")]
    WakeCount { expected: usize, got: usize },
    #[error("wake tick {wake} of processor {id} exceeds n = {n}")]
    WakeOutOfRange { id: ProcessorId, wake: Tick, n: u64 },
    #[error("algorithm {0} requires the complete topology")]
    RequiresComplete(Algorithm),
    #[error("k override must be ≥ 1")]
    ZeroK,
    #[error("max_ticks must be ≥ 1")]
    ZeroHorizon,
    #[error("unknown algorithm {0:?}")]
    UnknownAlgorithm(String),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error("{0}")]
    Parse(String),
}

/// `ceil(sqrt(8 n / m))`, exactly.
///
/// The smallest `k` with `k^2 * m >= 8 n`; since `k^2` is an integer this is
/// the ceiling square root of `ceil(8n / m)`.
pub fn compute_k(n: u64, m: u64) -> Result<u64, ConfigError> {
    if n == 0 {
        return Err(ConfigError::ZeroWindow);
    }
    if m == 0 {
        return Err(ConfigError::NoProcessors);
    }
    Ok(ceil_sqrt((8 * n).div_ceil(m)))
}

/// Smallest `r` with `r * r >= x`.
pub fn ceil_sqrt(x: u64) -> u64 {
    let r = x.isqrt();
    if r * r == x {
        r
    } else {
        r + 1
    }
}

/// `ceil(log2(n))`, with `ceil_log2(1) == 0`.
pub fn ceil_log2(n: u64) -> u64 {
    if n <= 1 {
        0
    } else {
        u64::from(64 - (n - 1).leading_zeros())
    }
}

/// Expand generators, check every invariant and shift wakes so the earliest
/// is 0. Idempotent.
pub fn validate_config(cfg: &SimConfig) -> Result<SimConfig, ConfigError> {
    if cfg.n == 0 {
        return Err(ConfigError::ZeroWindow);
    }
    if cfg.m == 0 {
        return Err(ConfigError::NoProcessors);
    }
    if cfg.k_override == Some(0) {
        return Err(ConfigError::ZeroK);
    }
    if cfg.max_ticks == Some(0) {
        return Err(ConfigError::ZeroHorizon);
    }
    let wakes = expand_wakes(&cfg.wakes, cfg.n, cfg.m, cfg.seed);
    if wakes.len() != cfg.m {
        return Err(ConfigError::WakeCount {
            expected: cfg.m,
            got: wakes.len(),
        });
    }
    if let Some((i, &w)) = wakes.iter().enumerate().find(|(_, &w)| w > cfg.n) {
        return Err(ConfigError::WakeOutOfRange {
            id: ProcessorId::from_index(i),
            wake: w,
            n: cfg.n,
        });
    }
    let graph = build_topology(&cfg.topology, cfg.m)?;
    if cfg.algorithm.requires_complete_graph() && !graph.is_complete() {
        return Err(ConfigError::RequiresComplete(cfg.algorithm));
    }
    let min = wakes.iter().copied().min().unwrap_or(0);
    let mut out = cfg.clone();
    out.wakes = WakeSpec::Explicit(wakes.into_iter().map(|w| w - min).collect());
    Ok(out)
}

/// Validated config together with its built topology.
pub(crate) fn validate_with_graph(cfg: &SimConfig) -> Result<(SimConfig, Graph), ConfigError> {
    let cfg = validate_config(cfg)?;
    let graph = build_topology(&cfg.topology, cfg.m)?;
    Ok((cfg, graph))
}

pub fn expand_wakes(spec: &WakeSpec, n: u64, m: usize, seed: u64) -> Vec<Tick> {
    match spec {
        WakeSpec::Explicit(w) => w.clone(),
        WakeSpec::Uniform => {
            if m == 1 {
                vec![0]
            } else {
                (0..m as u64).map(|i| i * n / (m as u64 - 1)).collect()
            }
        }
        WakeSpec::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..m).map(|_| rng.gen_range(0..=n)).collect()
        }
        WakeSpec::Clustered => {
            let early = m.div_ceil(2);
            (0..m).map(|i| if i < early { 0 } else { n }).collect()
        }
    }
}
