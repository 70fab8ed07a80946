//! Agony: total penalty of edges that do not climb the ranking.
//!
//! An edge `u → v` costs `r(u) − r(v) + 1` when `r(u) ≥ r(v)` and nothing
//! otherwise; `h = 1 − A*/m`.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

use serde::{Deserialize, Serialize};

use super::RankedPartition;
use crate::error::{Error, Result};
use crate::graph::{components, Connectivity, PaymentGraph};

/// Largest node count accepted by the exact solver.
pub const EXACT_MAX_N: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgonyMode {
    ExactSmall,
    Heuristic,
}

pub fn edge_cost(ru: i64, rv: i64) -> u64 {
    if ru >= rv {
        (ru - rv + 1) as u64
    } else {
        0
    }
}

/// Agony of `ranks` over the unweighted edges of `g`.
pub fn agony(g: &PaymentGraph, ranks: &[i64]) -> Result<u64> {
    if ranks.len() != g.n() {
        return Err(Error::invalid(format!("{} ranks for {} nodes", ranks.len(), g.n())));
    }
    Ok(g.edges().map(|(u, v, _)| edge_cost(ranks[u], ranks[v])).sum())
}

pub fn hierarchy(agony: u64, m: usize) -> f64 {
    1.0 - agony as f64 / m as f64
}

pub fn minimize_agony(g: &PaymentGraph, mode: AgonyMode) -> Result<RankedPartition> {
    if g.m() == 0 {
        return Err(Error::invalid("agony needs at least one edge"));
    }
    let ranks = match mode {
        AgonyMode::ExactSmall => exact_ranks(g)?,
        AgonyMode::Heuristic => heuristic_ranks(g),
    };
    Ok(partition_from_ranks(g, &ranks, mode == AgonyMode::ExactSmall))
}

/// Compresses ranks to `1..M` and scores them. Dropping empty ranks never
/// raises agony.
pub fn partition_from_ranks(g: &PaymentGraph, ranks: &[i64], exact: bool) -> RankedPartition {
    let mut levels: Vec<i64> = ranks.to_vec();
    levels.sort_unstable();
    levels.dedup();
    let assignment: Vec<usize> = ranks.iter().map(|r| levels.binary_search(r).expect("rank present") + 1).collect();
    let compressed: Vec<i64> = assignment.iter().map(|&a| a as i64).collect();
    let a = agony(g, &compressed).expect("sizes match");
    RankedPartition {
        assignment,
        ordered: true,
        n_groups: levels.len(),
        score: hierarchy(a, g.m()),
        levels: 0,
        agony: Some(a),
        exact,
    }
}

/// Subset dynamic program over layers placed bottom-up.
///
/// With `S` the nodes below the new layer `L`, every edge `u → v` with
/// `v ∈ S ∪ L` and `u ∉ S` pays one unit for this layer, which sums to
/// `r(u) − r(v) + 1` over the layers it spans.
fn exact_ranks(g: &PaymentGraph) -> Result<Vec<i64>> {
    let n = g.n();
    if n > EXACT_MAX_N {
        return Err(Error::invalid(format!("exact agony limited to {EXACT_MAX_N} nodes, got {n}")));
    }
    let full: u32 = if n == 32 { u32::MAX } else { (1u32 << n) - 1 };
    let pred: Vec<u32> = (0..n).map(|v| g.predecessors(v).iter().fold(0u32, |acc, &u| acc | 1 << u)).collect();
    let size = 1usize << n;
    let mut dp = vec![u64::MAX; size];
    let mut choice = vec![0u32; size];
    dp[0] = 0;
    for s in 0..size as u32 {
        if dp[s as usize] == u64::MAX {
            continue;
        }
        let rest = full & !s;
        let mut layer = rest;
        while layer != 0 {
            let t = s | layer;
            let mut cost = 0u64;
            let mut bits = t;
            while bits != 0 {
                let v = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                cost += (pred[v] & !s).count_ones() as u64;
            }
            let total = dp[s as usize] + cost;
            if total < dp[t as usize] {
                dp[t as usize] = total;
                choice[t as usize] = layer;
            }
            layer = (layer - 1) & rest;
        }
    }
    // unwind: the last chosen layer is the top rank
    let mut layers = Vec::new();
    let mut t = full;
    while t != 0 {
        let l = choice[t as usize];
        layers.push(l);
        t &= !l;
    }
    let mut ranks = vec![0i64; n];
    for (depth, l) in layers.iter().rev().enumerate() {
        for v in 0..n {
            if l >> v & 1 == 1 {
                ranks[v] = depth as i64 + 1;
            }
        }
    }
    Ok(ranks)
}

/// Longest-path layering over the edges accepted by `keep`, processing
/// nodes in `order` (a topological order of the kept edges).
fn layer_along(g: &PaymentGraph, order: &[usize], keep: impl Fn(usize, usize) -> bool) -> Vec<i64> {
    let mut ranks = vec![1i64; g.n()];
    for &u in order {
        for &v in g.successors(u) {
            if keep(u, v) && ranks[v] < ranks[u] + 1 {
                ranks[v] = ranks[u] + 1;
            }
        }
    }
    ranks
}

/// Strongly connected components collapsed to one rank, layered by longest path.
pub fn condensation_layering(g: &PaymentGraph) -> Vec<i64> {
    let scc = components(g, Connectivity::Strong);
    let c = scc.count();
    let mut indeg = vec![0usize; c];
    let mut cadj: Vec<Vec<usize>> = vec![Vec::new(); c];
    for (u, v, _) in g.edges() {
        let (a, b) = (scc.label[u], scc.label[v]);
        if a != b {
            cadj[a].push(b);
            indeg[b] += 1;
        }
    }
    let mut crank = vec![1i64; c];
    let mut queue: VecDeque<usize> = (0..c).filter(|&x| indeg[x] == 0).collect();
    while let Some(a) = queue.pop_front() {
        for &b in &cadj[a] {
            crank[b] = crank[b].max(crank[a] + 1);
            indeg[b] -= 1;
            if indeg[b] == 0 {
                queue.push_back(b);
            }
        }
    }
    (0..g.n()).map(|i| crank[scc.label[i]]).collect()
}

/// Eades–Lin–Smyth ordering: peel sinks to the back, sources to the front,
/// otherwise the node with the largest out- minus in-degree to the front.
pub fn eades_order(g: &PaymentGraph) -> Vec<usize> {
    let n = g.n();
    let mut outd: Vec<i64> = (0..n).map(|i| g.out_degree(i) as i64).collect();
    let mut ind: Vec<i64> = (0..n).map(|i| g.in_degree(i) as i64).collect();
    let mut removed = vec![false; n];
    let mut front = Vec::with_capacity(n);
    let mut back = Vec::new();
    let mut sinks: VecDeque<usize> = (0..n).filter(|&i| outd[i] == 0).collect();
    let mut sources: VecDeque<usize> = (0..n).filter(|&i| ind[i] == 0 && outd[i] > 0).collect();
    let mut heap: BinaryHeap<(i64, Reverse<usize>)> = (0..n).map(|i| (outd[i] - ind[i], Reverse(i))).collect();
    let mut left = n;

    let remove = |x: usize,
                  removed: &mut Vec<bool>,
                  outd: &mut Vec<i64>,
                  ind: &mut Vec<i64>,
                  sinks: &mut VecDeque<usize>,
                  sources: &mut VecDeque<usize>,
                  heap: &mut BinaryHeap<(i64, Reverse<usize>)>| {
        removed[x] = true;
        for &v in g.successors(x) {
            if !removed[v] {
                ind[v] -= 1;
                if ind[v] == 0 && outd[v] > 0 {
                    sources.push_back(v);
                }
                heap.push((outd[v] - ind[v], Reverse(v)));
            }
        }
        for &u in g.predecessors(x) {
            if !removed[u] {
                outd[u] -= 1;
                if outd[u] == 0 {
                    sinks.push_back(u);
                }
                heap.push((outd[u] - ind[u], Reverse(u)));
            }
        }
    };

    while left > 0 {
        if let Some(x) = sinks.pop_front() {
            if removed[x] {
                continue;
            }
            back.push(x);
            remove(x, &mut removed, &mut outd, &mut ind, &mut sinks, &mut sources, &mut heap);
            left -= 1;
            continue;
        }
        if let Some(x) = sources.pop_front() {
            if removed[x] {
                continue;
            }
            front.push(x);
            remove(x, &mut removed, &mut outd, &mut ind, &mut sinks, &mut sources, &mut heap);
            left -= 1;
            continue;
        }
        let Some((delta, Reverse(x))) = heap.pop() else { break };
        if removed[x] || delta != outd[x] - ind[x] {
            continue;
        }
        front.push(x);
        remove(x, &mut removed, &mut outd, &mut ind, &mut sinks, &mut sources, &mut heap);
        left -= 1;
    }
    back.reverse();
    front.extend(back);
    front
}

fn eades_layering(g: &PaymentGraph) -> Vec<i64> {
    let order = eades_order(g);
    let mut pos = vec![0usize; g.n()];
    for (p, &v) in order.iter().enumerate() {
        pos[v] = p;
    }
    layer_along(g, &order, |u, v| pos[u] < pos[v])
}

/// Best rank for node `x` with every other rank fixed. The cost is convex
/// piecewise linear in `r`, so only breakpoints need checking.
fn best_rank(g: &PaymentGraph, ranks: &[i64], x: usize, succ: &mut Vec<i64>, pred: &mut Vec<i64>) -> (i64, u64) {
    succ.clear();
    pred.clear();
    succ.extend(g.successors(x).iter().map(|&v| ranks[v]));
    pred.extend(g.predecessors(x).iter().map(|&u| ranks[u]));
    succ.sort_unstable();
    pred.sort_unstable();
    let s_sum: Vec<i64> = std::iter::once(0).chain(succ.iter().scan(0, |a, &r| { *a += r; Some(*a) })).collect();
    let p_sum: Vec<i64> = std::iter::once(0).chain(pred.iter().scan(0, |a, &r| { *a += r; Some(*a) })).collect();
    let cost = |r: i64| -> u64 {
        // successors with rank ≤ r pay r − r_v + 1
        let cs = succ.partition_point(|&v| v <= r);
        let a = cs as i64 * (r + 1) - s_sum[cs];
        // predecessors with rank ≥ r pay r_u − r + 1
        let cp = pred.partition_point(|&u| u < r);
        let b = (p_sum[pred.len()] - p_sum[cp]) - (pred.len() - cp) as i64 * (r - 1);
        (a + b) as u64
    };
    let current = ranks[x];
    let mut best = (current, cost(current));
    for r in succ.iter().map(|v| v - 1).chain(pred.iter().map(|u| u + 1)) {
        let c = cost(r);
        if c < best.1 || c == best.1 && r == current {
            best = (r, c);
        }
    }
    best
}

/// One pass of single-node moves. Returns the agony saved.
fn node_pass(g: &PaymentGraph, ranks: &mut [i64]) -> u64 {
    let (mut succ, mut pred) = (Vec::new(), Vec::new());
    let mut saved = 0;
    for x in 0..g.n() {
        let before = {
            let r = ranks[x];
            let s: u64 = g.successors(x).iter().map(|&v| edge_cost(r, ranks[v])).sum();
            let p: u64 = g.predecessors(x).iter().map(|&u| edge_cost(ranks[u], r)).sum();
            s + p
        };
        let (r, c) = best_rank(g, ranks, x, &mut succ, &mut pred);
        if c < before {
            ranks[x] = r;
            saved += before - c;
        }
    }
    saved
}

/// Repeatedly merges the adjacent rank pair whose merge lowers agony the most.
fn merge_pass(g: &PaymentGraph, ranks: &mut [i64]) -> u64 {
    let mut saved = 0;
    loop {
        let lo = *ranks.iter().min().unwrap_or(&0);
        let hi = *ranks.iter().max().unwrap_or(&0);
        if hi <= lo {
            return saved;
        }
        let span = (hi - lo) as usize;
        // boundary b sits between levels lo+b and lo+b+1; merging it turns
        // adjacent forward edges lateral and shortens backward edges across it
        let mut forward = vec![0i64; span];
        let mut diff = vec![0i64; span + 1];
        for (u, v, _) in g.edges() {
            let (ru, rv) = (ranks[u], ranks[v]);
            if ru + 1 == rv {
                forward[(ru - lo) as usize] += 1;
            } else if ru > rv {
                diff[(rv - lo) as usize] += 1;
                diff[(ru - lo) as usize] -= 1;
            }
        }
        let mut backward = 0i64;
        let mut best = (0i64, usize::MAX);
        for b in 0..span {
            backward += diff[b];
            let d = forward[b] - backward;
            if d < best.0 {
                best = (d, b);
            }
        }
        if best.1 == usize::MAX {
            return saved;
        }
        let cut = lo + best.1 as i64;
        for r in ranks.iter_mut() {
            if *r > cut {
                *r -= 1;
            }
        }
        saved += (-best.0) as u64;
    }
}

fn local_search(g: &PaymentGraph, ranks: &mut [i64]) {
    for _ in 0..200 {
        let a = node_pass(g, ranks);
        let b = merge_pass(g, ranks);
        if a + b == 0 {
            break;
        }
    }
}

/// Longest-path layering of the condensation and of an Eades–Lin–Smyth
/// ordering, each improved by single-node moves and rank merges; the
/// lower-agony result wins.
pub fn heuristic_ranks(g: &PaymentGraph) -> Vec<i64> {
    let mut best: Option<(u64, Vec<i64>)> = None;
    for mut ranks in [condensation_layering(g), eades_layering(g)] {
        local_search(g, &mut ranks);
        let a = agony(g, &ranks).expect("sizes match");
        if best.as_ref().is_none_or(|b| a < b.0) {
            best = Some((a, ranks));
        }
    }
    best.expect("two candidates").1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::testutil::graph;
    use proptest::prelude::*;

    /// minimum agony over every rank function V → {1..n}
    pub(crate) fn brute_force(g: &PaymentGraph) -> u64 {
        let n = g.n();
        let mut ranks = vec![1i64; n];
        let mut best = u64::MAX;
        loop {
            best = best.min(agony(g, &ranks).unwrap());
            let mut i = 0;
            while i < n {
                if ranks[i] < n as i64 {
                    ranks[i] += 1;
                    break;
                }
                ranks[i] = 1;
                i += 1;
            }
            if i == n {
                return best;
            }
        }
    }

    #[test]
    fn direct_evaluation() {
        let chain = graph(3, &[(0, 1), (1, 2)]);
        assert_eq!(agony(&chain, &[1, 2, 3]).unwrap(), 0);
        let two = graph(2, &[(0, 1), (1, 0)]);
        assert_eq!(agony(&two, &[1, 2]).unwrap(), 2);
        assert_eq!(agony(&chain, &[5, 5, 5]).unwrap(), 2);
        assert_eq!(agony(&chain, &[7, 8, 9]).unwrap(), agony(&chain, &[1, 2, 3]).unwrap());
    }

    #[test]
    fn endpoints() {
        let dag = graph(5, &[(0, 1), (0, 2), (1, 3), (2, 3), (3, 4), (0, 4)]);
        for mode in [AgonyMode::ExactSmall, AgonyMode::Heuristic] {
            let p = minimize_agony(&dag, mode).unwrap();
            assert_eq!(p.agony, Some(0));
            assert_eq!(p.score, 1.0);
        }
        let two = graph(2, &[(0, 1), (1, 0)]);
        let p = minimize_agony(&two, AgonyMode::ExactSmall).unwrap();
        assert_eq!((p.agony, p.score), (Some(2), 0.0));
        let k3: Vec<(usize, usize)> = (0..3).flat_map(|u| (0..3).map(move |v| (u, v))).filter(|e| e.0 != e.1).collect();
        let k3 = graph(3, &k3);
        assert_eq!(brute_force(&k3), 6);
        let p = minimize_agony(&k3, AgonyMode::ExactSmall).unwrap();
        assert_eq!((p.agony, p.score), (Some(6), 0.0));
    }

    #[test]
    fn exact_matches_brute_force() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
        for _ in 0..100 {
            let n = rng.random_range(2..=6);
            let p = rng.random_range(0.1..0.7);
            let edges: Vec<(usize, usize)> = (0..n)
                .flat_map(|u| (0..n).map(move |v| (u, v)))
                .filter(|e| e.0 != e.1)
                .filter(|_| rng.random::<f64>() < p)
                .collect();
            if edges.is_empty() {
                continue;
            }
            let g = graph(n, &edges);
            let want = brute_force(&g);
            assert_eq!(minimize_agony(&g, AgonyMode::ExactSmall).unwrap().agony, Some(want));
            assert!(minimize_agony(&g, AgonyMode::Heuristic).unwrap().agony.unwrap() >= want);
        }
    }

    #[test]
    fn exact_rejects_large_graphs() {
        let edges: Vec<(usize, usize)> = (0..19).map(|i| (i, i + 1)).collect();
        assert!(minimize_agony(&graph(20, &edges), AgonyMode::ExactSmall).is_err());
    }

    #[test]
    fn eades_order_is_a_permutation() {
        let g = graph(6, &[(0, 1), (1, 2), (2, 0), (2, 3), (3, 4), (4, 5), (5, 3)]);
        let mut o = eades_order(&g);
        o.sort_unstable();
        assert_eq!(o, (0..6).collect::<Vec<_>>());
    }

    proptest! {
        #[test]
        fn heuristic_bounds(raw in proptest::collection::vec((0usize..25, 0usize..25), 1..90)) {
            let edges: Vec<(usize, usize)> = raw.into_iter().filter(|e| e.0 != e.1).collect();
            prop_assume!(!edges.is_empty());
            let g = graph(25, &edges);
            let p = minimize_agony(&g, AgonyMode::Heuristic).unwrap();
            let a = p.agony.unwrap();
            let init = agony(&g, &condensation_layering(&g)).unwrap();
            prop_assert!(a <= init && init <= g.m() as u64);
            prop_assert!((0.0..=1.0).contains(&p.score));
            prop_assert_eq!(p.assignment.iter().max().copied(), Some(p.n_groups));
            // dropping edges that do not climb leaves a DAG
            let kept: Vec<(usize, usize)> = g.edges()
                .filter(|&(u, v, _)| p.assignment[u] < p.assignment[v])
                .map(|(u, v, _)| (u, v))
                .collect();
            let dag = graph(25, &kept);
            prop_assert_eq!(components(&dag, Connectivity::Strong).count(), 25);
        }
    }
}
