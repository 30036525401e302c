//! Communication graphs: the complete graph plus the two-clique families used
//! by the multi-hop lower bounds.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::ProcessorId;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum TopologySpec {
    Complete,
    /// Two cliques on `ceil(m/2)` and `floor(m/2)` vertices joined by one edge.
    TwoClique,
    /// Two cliques joined by `ell + 2` disjoint bridge edges; needs `4(ell + 2) < m`.
    LConnected {
        ell: usize,
    },
    /// Edge iff the squared integer distance is at most `radius^2`.
    UnitDisk {
        positions: Vec<(i64, i64)>,
        radius: i64,
    },
    /// The two-clique graph realized as a unit-disk placement.
    UnitDiskTwoClique,
    /// 1-based undirected edges.
    Edges {
        edges: Vec<(u32, u32)>,
    },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TopologyError {
    #[error("two-clique topologies need m ≥ 2, got {0}")]
    TooSmall(usize),
    #[error("l-connected graph needs ℓ < m/4 − 2 (ℓ = {ell}, m = {m})")]
    TooManyBridges { ell: usize, m: usize },
    #[error("unit-disk placement lists {got} positions for {m} processors")]
    PositionCount { got: usize, m: usize },
    #[error("unit-disk radius must be ≥ 1")]
    BadRadius,
    #[error("edge ({0}, {1}) is not between distinct ids in 1..=m")]
    BadEdge(u32, u32),
    #[error("edge ({0}, {1}) listed twice")]
    DuplicateEdge(u32, u32),
    #[error("unit-disk placement does not realize the two-clique graph for m = {0}")]
    PlacementFailed(usize),
}

/// Simple undirected graph on processors `1..=m`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    m: usize,
    adj: Vec<Vec<usize>>,
    matrix: Vec<bool>,
}

impl Graph {
    pub fn empty(m: usize) -> Self {
        Graph {
            m,
            adj: vec![Vec::new(); m],
            matrix: vec![false; m * m],
        }
    }

    pub fn complete(m: usize) -> Self {
        let mut g = Graph::empty(m);
        for a in 0..m {
            for b in a + 1..m {
                g.add_edge(a, b);
            }
        }
        g
    }

    fn add_edge(&mut self, a: usize, b: usize) -> bool {
        if a == b || self.matrix[a * self.m + b] {
            return false;
        }
        self.matrix[a * self.m + b] = true;
        self.matrix[b * self.m + a] = true;
        self.adj[a].push(b);
        self.adj[b].push(a);
        true
    }

    fn sort(&mut self) {
        for l in &mut self.adj {
            l.sort_unstable();
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Adjacency by zero-based index.
    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.matrix[a * self.m + b]
    }

    pub fn neighbors(&self, a: usize) -> &[usize] {
        &self.adj[a]
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn is_complete(&self) -> bool {
        self.edge_count() == self.m * (self.m - 1) / 2
    }

    /// Edges as `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> Vec<(ProcessorId, ProcessorId)> {
        let mut out = Vec::with_capacity(self.edge_count());
        for (a, l) in self.adj.iter().enumerate() {
            for &b in l.iter().filter(|&&b| b > a) {
                out.push((ProcessorId::from_index(a), ProcessorId::from_index(b)));
            }
        }
        out
    }
}

/// Split point of the two-clique constructions: vertices `0..h` form the
/// first clique.
fn half(m: usize) -> usize {
    m.div_ceil(2)
}

fn two_cliques(m: usize) -> Graph {
    let h = half(m);
    let mut g = Graph::empty(m);
    for a in 0..m {
        for b in a + 1..m {
            if (a < h) == (b < h) {
                g.add_edge(a, b);
            }
        }
    }
    g
}

pub fn build_topology(spec: &TopologySpec, m: usize) -> Result<Graph, TopologyError> {
    let mut g = match spec {
        TopologySpec::Complete => Graph::complete(m),
        TopologySpec::TwoClique => {
            if m < 2 {
                return Err(TopologyError::TooSmall(m));
            }
            let mut g = two_cliques(m);
            let h = half(m);
            g.add_edge(h - 1, h);
            g
        }
        TopologySpec::LConnected { ell } => {
            if 4 * (ell + 2) >= m {
                return Err(TopologyError::TooManyBridges { ell: *ell, m });
            }
            let mut g = two_cliques(m);
            let h = half(m);
            for i in 0..ell + 2 {
                g.add_edge(i, h + i);
            }
            g
        }
        TopologySpec::UnitDisk { positions, radius } => unit_disk(positions, *radius, m)?,
        TopologySpec::UnitDiskTwoClique => {
            if m < 2 {
                return Err(TopologyError::TooSmall(m));
            }
            let (positions, radius) = two_clique_placement(m);
            let g = unit_disk(&positions, radius, m)?;
            let expected = build_topology(&TopologySpec::TwoClique, m)?;
            if g != expected {
                return Err(TopologyError::PlacementFailed(m));
            }
            g
        }
        TopologySpec::Edges { edges } => {
            let mut g = Graph::empty(m);
            for &(u, v) in edges {
                let ok = |x: u32| x >= 1 && (x as usize) <= m;
                if u == v || !ok(u) || !ok(v) {
                    return Err(TopologyError::BadEdge(u, v));
                }
                if !g.add_edge(u as usize - 1, v as usize - 1) {
                    return Err(TopologyError::DuplicateEdge(u, v));
                }
            }
            g
        }
    };
    g.sort();
    Ok(g)
}

fn unit_disk(positions: &[(i64, i64)], radius: i64, m: usize) -> Result<Graph, TopologyError> {
    if positions.len() != m {
        return Err(TopologyError::PositionCount {
            got: positions.len(),
            m,
        });
    }
    if radius < 1 {
        return Err(TopologyError::BadRadius);
    }
    let r2 = i128::from(radius) * i128::from(radius);
    let mut g = Graph::empty(m);
    for a in 0..m {
        for b in a + 1..m {
            let dx = i128::from(positions[a].0 - positions[b].0);
            let dy = i128::from(positions[a].1 - positions[b].1);
            if dx * dx + dy * dy <= r2 {
                g.add_edge(a, b);
            }
        }
    }
    Ok(g)
}

/// Integer placement of the two-clique graph as a unit-disk graph.
///
/// Each clique sits on a circle of radius slightly below `r/2`, so any two of
/// its points are within range. The bridge endpoints face each other on the
/// x-axis at distance exactly `r`; every other cross pair is farther apart.
pub fn two_clique_placement(m: usize) -> (Vec<(i64, i64)>, i64) {
    const R: i64 = 1_000_000;
    let rho = R / 2 - 2;
    let h = half(m);
    let second = m - h;
    let far_center = R + 2 * rho;
    let on_circle = |cx: i64, base: f64, j: usize, count: usize| {
        let a = base + std::f64::consts::TAU * j as f64 / count as f64;
        (
            cx + (rho as f64 * a.cos()).round() as i64,
            (rho as f64 * a.sin()).round() as i64,
        )
    };
    let mut pos = Vec::with_capacity(m);
    // The bridge endpoint of the first clique is its last vertex, at angle 0.
    for j in 0..h {
        if j + 1 == h {
            pos.push((rho, 0));
        } else {
            pos.push(on_circle(0, 0.0, j + 1, h));
        }
    }
    // The bridge endpoint of the second clique is its first vertex, at angle pi.
    for j in 0..second {
        if j == 0 {
            pos.push((far_center - rho, 0));
        } else {
            pos.push(on_circle(far_center, std::f64::consts::PI, j, second));
        }
    }
    (pos, R)
}
