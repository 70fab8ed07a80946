use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{components, Connectivity, PaymentGraph};
use crate::error::{Error, Result};

pub const UNREACHABLE: usize = usize::MAX;

/// Hop distances from `source` along edge direction, up to `max_depth` hops.
pub fn bfs_directed(g: &PaymentGraph, source: usize, max_depth: usize) -> Vec<usize> {
    let mut dist = vec![UNREACHABLE; g.n()];
    dist[source] = 0;
    let mut queue = VecDeque::from([source]);
    while let Some(u) = queue.pop_front() {
        let d = dist[u];
        if d >= max_depth {
            continue;
        }
        for &v in g.successors(u) {
            if dist[v] == UNREACHABLE {
                dist[v] = d + 1;
                queue.push_back(v);
            }
        }
    }
    dist
}

/// Hop distances on the undirected view, with BFS parents.
pub fn bfs_undirected(g: &PaymentGraph, source: usize) -> (Vec<usize>, Vec<usize>) {
    let n = g.n();
    let mut dist = vec![UNREACHABLE; n];
    let mut parent = vec![UNREACHABLE; n];
    dist[source] = 0;
    let mut queue = VecDeque::from([source]);
    while let Some(u) = queue.pop_front() {
        for &v in g.successors(u).iter().chain(g.predecessors(u)) {
            if dist[v] == UNREACHABLE {
                dist[v] = dist[u] + 1;
                parent[v] = u;
                queue.push_back(v);
            }
        }
    }
    (dist, parent)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiameterMode {
    Exact,
    DoubleSweepBound,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diameter {
    /// Exact diameter, or the best lower bound in bound mode.
    pub value: usize,
    /// Upper bound (equal to `value` in exact mode).
    pub upper: usize,
    pub method: DiameterMode,
    /// The input had more than one weak component; the largest was used.
    pub disconnected: bool,
}

/// farthest reachable node from the given distances, lowest index on ties
fn farthest(dist: &[usize]) -> (usize, usize) {
    let mut best = (0, 0);
    for (i, &d) in dist.iter().enumerate() {
        if d != UNREACHABLE && d > best.1 {
            best = (i, d);
        }
    }
    best
}

/// Undirected hop diameter of the largest weak component.
pub fn diameter(g: &PaymentGraph, mode: DiameterMode) -> Result<Diameter> {
    if g.n() == 0 {
        return Err(Error::invalid("diameter of an empty graph"));
    }
    let weak = components(g, Connectivity::Weak);
    let disconnected = weak.count() > 1;
    let members = weak.members(0);

    match mode {
        DiameterMode::Exact => {
            let value = members
                .iter()
                .map(|&s| farthest(&bfs_undirected(g, s).0).1)
                .max()
                .unwrap_or(0);
            Ok(Diameter { value, upper: value, method: mode, disconnected })
        }
        DiameterMode::DoubleSweepBound => {
            let start = *members
                .iter()
                .max_by(|&&a, &&b| {
                    let (da, db) = (g.in_degree(a) + g.out_degree(a), g.in_degree(b) + g.out_degree(b));
                    da.cmp(&db).then(b.cmp(&a))
                })
                .expect("component is non-empty");
            let mut lower = 0;
            let mut upper = usize::MAX;
            let mut from = start;
            for _ in 0..4 {
                let (d0, _) = bfs_undirected(g, from);
                let (a, ecc0) = farthest(&d0);
                upper = upper.min(2 * ecc0);
                let (da, parent) = bfs_undirected(g, a);
                let (b, ecc_a) = farthest(&da);
                lower = lower.max(ecc_a);
                // walk half-way back from b to a to find a center candidate
                let mut c = b;
                for _ in 0..ecc_a / 2 {
                    c = parent[c];
                }
                let (dc, _) = bfs_undirected(g, c);
                let (next, ecc_c) = farthest(&dc);
                upper = upper.min(2 * ecc_c);
                lower = lower.max(ecc_c);
                if lower == upper {
                    break;
                }
                from = if next == from { b } else { next };
            }
            Ok(Diameter { value: lower, upper, method: mode, disconnected })
        }
    }
}

/// Harmonic closeness `(1/(n-1)) Σ_{v≠u} 1/d(u,v)` over directed distances.
pub fn closeness(g: &PaymentGraph, node: usize) -> Result<f64> {
    let n = g.n();
    if node >= n {
        return Err(Error::UnknownNode(node.to_string()));
    }
    if n < 2 {
        return Ok(0.0);
    }
    let dist = bfs_directed(g, node, usize::MAX);
    let sum: f64 = dist
        .iter()
        .enumerate()
        .filter(|&(v, &d)| v != node && d != UNREACHABLE)
        .map(|(_, &d)| 1.0 / d as f64)
        .sum();
    Ok(sum / (n - 1) as f64)
}
