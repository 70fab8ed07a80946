//! Directed modularity and its Louvain maximization.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{relabel_by_size, RankedPartition};
use crate::error::{Error, Result};
use crate::graph::PaymentGraph;

const EPS: f64 = 1e-12;

/// Directed modularity `Σ_C [m_C/m − K_out(C)·K_in(C)/m²]`, every edge
/// counted once. `assignment` may use any group ids.
pub fn modularity(g: &PaymentGraph, assignment: &[usize]) -> Result<f64> {
    modularity_with(g, assignment, false)
}

pub fn modularity_with(g: &PaymentGraph, assignment: &[usize], weighted: bool) -> Result<f64> {
    if assignment.len() != g.n() {
        return Err(Error::invalid(format!("{} assignments for {} nodes", assignment.len(), g.n())));
    }
    let k = assignment.iter().max().map_or(0, |&x| x + 1);
    let mut inside = vec![0.0; k];
    let mut k_out = vec![0.0; k];
    let mut k_in = vec![0.0; k];
    let mut m = 0.0;
    for (u, v, w) in g.edges() {
        let w = if weighted { w } else { 1.0 };
        m += w;
        k_out[assignment[u]] += w;
        k_in[assignment[v]] += w;
        if assignment[u] == assignment[v] {
            inside[assignment[u]] += w;
        }
    }
    if m == 0.0 {
        return Ok(0.0);
    }
    Ok((0..k).map(|c| inside[c] / m - k_out[c] * k_in[c] / (m * m)).sum())
}

/// Weighted directed graph that may carry self-loops, used across levels.
struct Level {
    out: Vec<Vec<(usize, f64)>>,
    inn: Vec<Vec<(usize, f64)>>,
    k_out: Vec<f64>,
    k_in: Vec<f64>,
}

impl Level {
    fn from_graph(g: &PaymentGraph, weighted: bool) -> Self {
        let n = g.n();
        let mut out = vec![Vec::new(); n];
        let mut inn = vec![Vec::new(); n];
        for (u, v, w) in g.edges() {
            let w = if weighted { w } else { 1.0 };
            out[u].push((v, w));
            inn[v].push((u, w));
        }
        Self::finish(out, inn)
    }

    fn finish(out: Vec<Vec<(usize, f64)>>, inn: Vec<Vec<(usize, f64)>>) -> Self {
        let k_out = out.iter().map(|e| e.iter().map(|x| x.1).sum()).collect();
        let k_in = inn.iter().map(|e| e.iter().map(|x| x.1).sum()).collect();
        Level { out, inn, k_out, k_in }
    }

    fn n(&self) -> usize {
        self.out.len()
    }

    fn aggregate(&self, comm: &[usize], count: usize) -> Level {
        let mut out: Vec<std::collections::BTreeMap<usize, f64>> = vec![Default::default(); count];
        for u in 0..self.n() {
            for &(v, w) in &self.out[u] {
                *out[comm[u]].entry(comm[v]).or_default() += w;
            }
        }
        let mut inn = vec![Vec::new(); count];
        let out: Vec<Vec<(usize, f64)>> = out
            .into_iter()
            .enumerate()
            .map(|(c, row)| {
                row.into_iter()
                    .inspect(|&(d, w)| inn[d].push((c, w)))
                    .collect()
            })
            .collect();
        Level::finish(out, inn)
    }
}

/// One local-moving phase. Returns whether any node moved.
fn local_moves(level: &Level, comm: &mut [usize], m: f64, rng: &mut ChaCha8Rng) -> bool {
    let n = level.n();
    let mut tot_out = vec![0.0; n];
    let mut tot_in = vec![0.0; n];
    let mut size = vec![0usize; n];
    for i in 0..n {
        tot_out[comm[i]] += level.k_out[i];
        tot_in[comm[i]] += level.k_in[i];
        size[comm[i]] += 1;
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut link = vec![0.0; n];
    let mut touched: Vec<usize> = Vec::new();
    let mut any = false;
    for _sweep in 0..1000 {
        order.shuffle(rng);
        let mut moved = false;
        for &i in &order {
            let own = comm[i];
            let (ko, ki) = (level.k_out[i], level.k_in[i]);
            tot_out[own] -= ko;
            tot_in[own] -= ki;
            size[own] -= 1;
            touched.clear();
            for &(j, w) in level.out[i].iter().chain(&level.inn[i]) {
                if j == i {
                    continue;
                }
                let c = comm[j];
                if link[c] == 0.0 {
                    touched.push(c);
                }
                link[c] += w;
            }
            let gain = |c: usize, link: &[f64]| link[c] / m - (ko * tot_in[c] + ki * tot_out[c]) / (m * m);
            let own_gain = gain(own, &link);
            let alone = size[own] == 0;
            let mut best = own;
            let mut best_gain = own_gain;
            // visit candidate communities in ascending id for a deterministic tie order
            touched.sort_unstable();
            for &c in &touched {
                if c == own {
                    continue;
                }
                let gc = gain(c, &link);
                let tie_merge = alone && best == own && (gc - best_gain).abs() <= EPS;
                if gc > best_gain + EPS || tie_merge {
                    best = c;
                    best_gain = gc;
                }
            }
            for &c in &touched {
                link[c] = 0.0;
            }
            if !alone && best_gain < -EPS {
                // leaving for an empty community has zero gain
                if let Some(empty) = size.iter().position(|&s| s == 0) {
                    best = empty;
                }
            }
            comm[i] = best;
            tot_out[best] += ko;
            tot_in[best] += ki;
            size[best] += 1;
            if best != own {
                moved = true;
                any = true;
            }
        }
        if !moved {
            break;
        }
    }
    any
}

fn compact(comm: &mut [usize]) -> usize {
    let mut map = std::collections::HashMap::new();
    for c in comm.iter_mut() {
        let next = map.len();
        *c = *map.entry(*c).or_insert(next);
    }
    map.len()
}

/// Multi-level Louvain on the unweighted graph, sweeping nodes in a seeded
/// random order. Groups are labelled 1..M by decreasing size.
pub fn louvain(g: &PaymentGraph, seed: u64) -> Result<RankedPartition> {
    louvain_with(g, seed, false)
}

pub fn louvain_with(g: &PaymentGraph, seed: u64, weighted: bool) -> Result<RankedPartition> {
    if g.m() == 0 {
        return Err(Error::invalid("louvain needs at least one edge"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = Level::from_graph(g, weighted);
    let m: f64 = base.k_out.iter().sum();
    let mut node_comm: Vec<usize> = (0..g.n()).collect();
    let mut level = Level::from_graph(g, weighted);
    let mut levels = 0;
    loop {
        let mut comm: Vec<usize> = (0..level.n()).collect();
        let moved = local_moves(&level, &mut comm, m, &mut rng);
        if !moved {
            break;
        }
        levels += 1;
        let count = compact(&mut comm);
        for c in node_comm.iter_mut() {
            *c = comm[*c];
        }
        if count == level.n() {
            break;
        }
        level = level.aggregate(&comm, count);
    }
    // a final single-node pass on the original graph makes the result locally optimal
    local_moves(&base, &mut node_comm, m, &mut rng);

    let mut q = modularity_with(g, &node_comm, weighted)?;
    if q < 0.0 {
        node_comm.iter_mut().for_each(|c| *c = 0);
        q = 0.0;
    }
    let (assignment, n_groups) = relabel_by_size(&node_comm);
    Ok(RankedPartition { assignment, ordered: false, n_groups, score: q, levels, agony: None, exact: false })
}

/// Runs Louvain once per seed in parallel and keeps the highest modularity;
/// equal scores go to the earliest seed.
pub fn louvain_best(g: &PaymentGraph, seeds: &[u64]) -> Result<RankedPartition> {
    let runs: Vec<RankedPartition> = seeds.par_iter().map(|&s| louvain(g, s)).collect::<Result<_>>()?;
    runs.into_iter()
        .reduce(|best, r| if r.score > best.score + EPS { r } else { best })
        .ok_or_else(|| Error::invalid("no seeds given"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::testutil::graph;
    use proptest::prelude::*;
    use rand::Rng;

    fn clique(offset: usize, k: usize) -> Vec<(usize, usize)> {
        let mut e = Vec::new();
        for u in 0..k {
            for v in 0..k {
                if u != v {
                    e.push((offset + u, offset + v));
                }
            }
        }
        e
    }

    /// every set partition of `0..n` as restricted growth strings
    fn set_partitions(n: usize) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut a = vec![0usize; n];
        fn rec(i: usize, max: usize, a: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if i == a.len() {
                out.push(a.clone());
                return;
            }
            for c in 0..=max + 1 {
                a[i] = c;
                rec(i + 1, max.max(c), a, out);
            }
        }
        if n > 0 {
            rec(1, 0, &mut a, &mut out);
        }
        out
    }

    #[test]
    fn trivial_and_two_cycles() {
        let g = graph(6, &[(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3)]);
        assert_eq!(modularity(&g, &[0; 6]).unwrap(), 0.0);
        assert!((modularity(&g, &[0, 0, 0, 1, 1, 1]).unwrap() - 0.5).abs() < 1e-15);
        let p = louvain(&g, 1).unwrap();
        assert_eq!(p.assignment, vec![1, 1, 1, 2, 2, 2]);
        assert!((p.score - 0.5).abs() < 1e-15);
    }

    #[test]
    fn relabeling_invariance() {
        let g = graph(6, &[(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3), (2, 3)]);
        let a = modularity(&g, &[0, 0, 1, 1, 2, 2]).unwrap();
        let b = modularity(&g, &[7, 7, 3, 3, 0, 0]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn cliques_match_exhaustive_oracle() {
        let mut edges = clique(0, 4);
        edges.extend(clique(4, 4));
        let g = graph(8, &edges);
        let best = set_partitions(8)
            .into_iter()
            .map(|p| (modularity(&g, &p).unwrap(), p))
            .fold((f64::MIN, vec![]), |a, b| if b.0 > a.0 { b } else { a });
        for seed in 0..5 {
            let p = louvain(&g, seed).unwrap();
            assert!((p.score - best.0).abs() < 1e-12);
            assert_eq!(p.assignment, vec![1, 1, 1, 1, 2, 2, 2, 2]);
        }
    }

    #[test]
    fn single_edge_merges() {
        let g = graph(2, &[(0, 1)]);
        let p = louvain(&g, 3).unwrap();
        assert_eq!(p.assignment, vec![1, 1]);
        assert_eq!(p.score, 0.0);
    }

    #[test]
    fn random_partitions_average_near_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 200;
        let mut edges = Vec::new();
        for u in 0..n {
            for v in 0..n {
                if u != v && rng.random::<f64>() < 0.02 {
                    edges.push((u, v));
                }
            }
        }
        let g = graph(n, &edges);
        let mean: f64 = (0..100)
            .map(|_| {
                let p: Vec<usize> = (0..n).map(|_| rng.random_range(0..5)).collect();
                modularity(&g, &p).unwrap()
            })
            .sum::<f64>()
            / 100.0;
        assert!(mean.abs() < 0.01, "{mean}");
    }

    #[test]
    fn deterministic_per_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let edges: Vec<(usize, usize)> =
            (0..400).map(|_| (rng.random_range(0..100), rng.random_range(0..100))).filter(|e| e.0 != e.1).collect();
        let g = graph(100, &edges);
        assert_eq!(louvain(&g, 9).unwrap(), louvain(&g, 9).unwrap());
        let best = louvain_best(&g, &[1, 2, 3]).unwrap();
        assert!(best.score >= louvain(&g, 2).unwrap().score - 1e-12);
    }

    proptest! {
        #[test]
        fn locally_optimal_and_not_below_trivial(
            raw in proptest::collection::vec((0usize..14, 0usize..14), 1..50),
            seed in 0u64..1000,
        ) {
            let edges: Vec<(usize, usize)> = raw.into_iter().filter(|e| e.0 != e.1).collect();
            prop_assume!(!edges.is_empty());
            let g = graph(14, &edges);
            let p = louvain(&g, seed).unwrap();
            prop_assert!(p.score >= -1e-12);
            let q = modularity(&g, &p.assignment).unwrap();
            prop_assert!((q - p.score).abs() < 1e-12);
            for i in 0..14 {
                for c in 0..=p.n_groups + 1 {
                    let mut moved = p.assignment.clone();
                    moved[i] = c;
                    prop_assert!(modularity(&g, &moved).unwrap() <= q + 1e-9, "node {} to {}", i, c);
                }
            }
        }
    }
}
