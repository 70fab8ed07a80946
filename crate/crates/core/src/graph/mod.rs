//! Immutable directed weighted payment graph.
//!
//! Nodes carry [`FirmMeta`]; edges are stored twice in compressed sparse row
//! form (out-edges and mirrored in-edges), sorted by endpoint index.

mod components;
mod distance;
pub mod io;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rating::FirmMeta;

pub use components::{bow_tie, components, BowTie, Components, Connectivity};
pub use distance::{bfs_directed, bfs_undirected, closeness, diameter, Diameter, DiameterMode, UNREACHABLE};

#[derive(Debug, Clone, PartialEq)]
pub struct PaymentGraph {
    nodes: Vec<FirmMeta>,
    index: HashMap<String, usize>,
    out_offsets: Vec<usize>,
    out_targets: Vec<usize>,
    out_weights: Vec<f64>,
    in_offsets: Vec<usize>,
    in_sources: Vec<usize>,
    in_weights: Vec<f64>,
}

impl PaymentGraph {
    /// Builds a graph from node metadata and `(source, target, weight)` triples.
    ///
    /// Parallel edges are merged by summing their weights. Self-loops,
    /// non-positive weights and out-of-range endpoints are rejected.
    pub fn new(nodes: Vec<FirmMeta>, edges: Vec<(usize, usize, f64)>) -> Result<Self> {
        let n = nodes.len();
        let mut index = HashMap::with_capacity(n);
        for (i, node) in nodes.iter().enumerate() {
            if index.insert(node.id.clone(), i).is_some() {
                return Err(Error::DuplicateFirm(node.id.clone()));
            }
        }
        let mut edges = edges;
        for &(u, v, w) in &edges {
            if u >= n || v >= n {
                return Err(Error::invalid(format!("edge ({u},{v}) out of range for {n} nodes")));
            }
            if u == v {
                return Err(Error::invalid(format!("self-loop on node {u}")));
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::invalid(format!("edge ({u},{v}) has non-positive weight {w}")));
            }
        }
        edges.sort_by_key(|e| (e.0, e.1));
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(edges.len());
        for (u, v, w) in edges {
            match merged.last_mut() {
                Some(last) if last.0 == u && last.1 == v => last.2 += w,
                _ => merged.push((u, v, w)),
            }
        }

        let m = merged.len();
        let mut out_offsets = vec![0usize; n + 1];
        let mut in_offsets = vec![0usize; n + 1];
        for &(u, v, _) in &merged {
            out_offsets[u + 1] += 1;
            in_offsets[v + 1] += 1;
        }
        for i in 0..n {
            out_offsets[i + 1] += out_offsets[i];
            in_offsets[i + 1] += in_offsets[i];
        }
        let out_targets = merged.iter().map(|e| e.1).collect();
        let out_weights = merged.iter().map(|e| e.2).collect();

        let mut in_sources = vec![0usize; m];
        let mut in_weights = vec![0.0; m];
        let mut cursor = in_offsets.clone();
        // merged is sorted by source, so each in-list ends up sorted by source
        for &(u, v, w) in &merged {
            in_sources[cursor[v]] = u;
            in_weights[cursor[v]] = w;
            cursor[v] += 1;
        }

        Ok(PaymentGraph {
            nodes,
            index,
            out_offsets,
            out_targets,
            out_weights,
            in_offsets,
            in_sources,
            in_weights,
        })
    }

    pub fn empty() -> Self {
        PaymentGraph::new(Vec::new(), Vec::new()).expect("empty graph is valid")
    }

    /// Number of nodes.
    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    /// Number of (aggregated) edges.
    pub fn m(&self) -> usize {
        self.out_targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, i: usize) -> &FirmMeta {
        &self.nodes[i]
    }

    pub fn nodes(&self) -> &[FirmMeta] {
        &self.nodes
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn out_degree(&self, u: usize) -> usize {
        self.out_offsets[u + 1] - self.out_offsets[u]
    }

    pub fn in_degree(&self, v: usize) -> usize {
        self.in_offsets[v + 1] - self.in_offsets[v]
    }

    pub fn successors(&self, u: usize) -> &[usize] {
        &self.out_targets[self.out_offsets[u]..self.out_offsets[u + 1]]
    }

    pub fn predecessors(&self, v: usize) -> &[usize] {
        &self.in_sources[self.in_offsets[v]..self.in_offsets[v + 1]]
    }

    pub fn out_edges(&self, u: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.out_offsets[u]..self.out_offsets[u + 1];
        self.out_targets[r.clone()].iter().copied().zip(self.out_weights[r].iter().copied())
    }

    pub fn in_edges(&self, v: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.in_offsets[v]..self.in_offsets[v + 1];
        self.in_sources[r.clone()].iter().copied().zip(self.in_weights[r].iter().copied())
    }

    /// All edges as `(source, target, weight)`, sorted by source then target.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n()).flat_map(move |u| self.out_edges(u).map(move |(v, w)| (u, v, w)))
    }

    pub fn out_strength(&self, u: usize) -> f64 {
        self.out_edges(u).map(|(_, w)| w).sum()
    }

    pub fn in_strength(&self, v: usize) -> f64 {
        self.in_edges(v).map(|(_, w)| w).sum()
    }

    pub fn total_weight(&self) -> f64 {
        self.out_weights.iter().sum()
    }

    /// Weight of edge `u -> v`, if present.
    pub fn weight(&self, u: usize, v: usize) -> Option<f64> {
        let r = self.out_offsets[u]..self.out_offsets[u + 1];
        self.out_targets[r.clone()]
            .binary_search(&v)
            .ok()
            .map(|k| self.out_weights[r.start + k])
    }

    /// Induced subgraph on the nodes whose metadata satisfies `keep`.
    pub fn subgraph<F>(&self, keep: F) -> PaymentGraph
    where
        F: Fn(&FirmMeta) -> bool,
    {
        let mask: Vec<bool> = self.nodes.iter().map(keep).collect();
        self.induced(&mask)
    }

    /// Induced subgraph on the nodes flagged in `mask`, preserving node order.
    pub fn induced(&self, mask: &[bool]) -> PaymentGraph {
        assert_eq!(mask.len(), self.n(), "mask length must equal node count");
        let mut remap = vec![usize::MAX; self.n()];
        let mut nodes = Vec::new();
        for (i, keep) in mask.iter().enumerate() {
            if *keep {
                remap[i] = nodes.len();
                nodes.push(self.nodes[i].clone());
            }
        }
        let edges = self
            .edges()
            .filter(|&(u, v, _)| mask[u] && mask[v])
            .map(|(u, v, w)| (remap[u], remap[v], w))
            .collect();
        PaymentGraph::new(nodes, edges).expect("induced subgraph of a valid graph is valid")
    }

    /// Same topology with every weight replaced by 1.
    pub fn unweighted(&self) -> PaymentGraph {
        let mut g = self.clone();
        g.out_weights.iter_mut().for_each(|w| *w = 1.0);
        g.in_weights.iter_mut().for_each(|w| *w = 1.0);
        g
    }
}

/// Per-node degree and strength table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeTable {
    pub in_degree: Vec<usize>,
    pub out_degree: Vec<usize>,
    pub in_strength: Vec<f64>,
    pub out_strength: Vec<f64>,
}

/// Mean degrees under the two averaging conventions in use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanDegrees {
    /// m / n, identical for in and out.
    pub all_nodes: f64,
    /// Mean in-degree over nodes with at least one incoming edge.
    pub in_nonzero: f64,
    /// Mean out-degree over nodes with at least one outgoing edge.
    pub out_nonzero: f64,
}

impl DegreeTable {
    pub fn total_degree(&self, i: usize) -> usize {
        self.in_degree[i] + self.out_degree[i]
    }

    pub fn size(&self, i: usize) -> f64 {
        self.in_strength[i] + self.out_strength[i]
    }

    pub fn means(&self) -> MeanDegrees {
        let n = self.in_degree.len();
        let m: usize = self.in_degree.iter().sum();
        let nonzero_mean = |d: &[usize]| {
            let (s, c) = d.iter().filter(|&&k| k > 0).fold((0usize, 0usize), |(s, c), &k| (s + k, c + 1));
            if c == 0 { 0.0 } else { s as f64 / c as f64 }
        };
        MeanDegrees {
            all_nodes: if n == 0 { 0.0 } else { m as f64 / n as f64 },
            in_nonzero: nonzero_mean(&self.in_degree),
            out_nonzero: nonzero_mean(&self.out_degree),
        }
    }
}

pub fn degrees(g: &PaymentGraph) -> DegreeTable {
    let n = g.n();
    DegreeTable {
        in_degree: (0..n).map(|i| g.in_degree(i)).collect(),
        out_degree: (0..n).map(|i| g.out_degree(i)).collect(),
        in_strength: (0..n).map(|i| g.in_strength(i)).collect(),
        out_strength: (0..n).map(|i| g.out_strength(i)).collect(),
    }
}

/// Directed density `m / (n (n - 1))`.
pub fn density(n: usize, m: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::Undefined(format!("density needs at least 2 nodes, got {n}")));
    }
    Ok(m as f64 / (n as f64 * (n as f64 - 1.0)))
}
