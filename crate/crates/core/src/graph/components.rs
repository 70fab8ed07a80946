use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::PaymentGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Connectivity {
    Weak,
    Strong,
}

/// Node partition into connected components.
///
/// Component ids are ordered by decreasing size; equal sizes are ordered by
/// their smallest member, so id 0 is always the largest component.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Components {
    pub label: Vec<usize>,
    pub sizes: Vec<usize>,
}

impl Components {
    fn from_raw(raw: Vec<usize>) -> Self {
        let n = raw.len();
        let count = raw.iter().map(|&c| c + 1).max().unwrap_or(0);
        let mut sizes = vec![0usize; count];
        let mut first = vec![usize::MAX; count];
        for (i, &c) in raw.iter().enumerate() {
            sizes[c] += 1;
            first[c] = first[c].min(i);
        }
        let mut order: Vec<usize> = (0..count).filter(|&c| sizes[c] > 0).collect();
        order.sort_by(|&a, &b| sizes[b].cmp(&sizes[a]).then(first[a].cmp(&first[b])));
        let mut remap = vec![usize::MAX; count];
        for (new, &old) in order.iter().enumerate() {
            remap[old] = new;
        }
        let label: Vec<usize> = (0..n).map(|i| remap[raw[i]]).collect();
        let sizes = order.iter().map(|&c| sizes[c]).collect();
        Components { label, sizes }
    }

    pub fn count(&self) -> usize {
        self.sizes.len()
    }

    pub fn members(&self, c: usize) -> Vec<usize> {
        (0..self.label.len()).filter(|&i| self.label[i] == c).collect()
    }

    /// Members of every component, indexed by component id.
    pub fn groups(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.count()];
        for (i, &c) in self.label.iter().enumerate() {
            out[c].push(i);
        }
        out
    }
}

pub fn components(g: &PaymentGraph, mode: Connectivity) -> Components {
    match mode {
        Connectivity::Weak => Components::from_raw(weak_labels(g)),
        Connectivity::Strong => Components::from_raw(tarjan(g)),
    }
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

fn weak_labels(g: &PaymentGraph) -> Vec<usize> {
    let n = g.n();
    let mut parent: Vec<usize> = (0..n).collect();
    for (u, v, _) in g.edges() {
        let (a, b) = (find(&mut parent, u), find(&mut parent, v));
        if a != b {
            parent[a.max(b)] = a.min(b);
        }
    }
    (0..n).map(|i| find(&mut parent, i)).collect()
}

/// Iterative Tarjan; returns a raw component id per node.
fn tarjan(g: &PaymentGraph) -> Vec<usize> {
    const UNSEEN: usize = usize::MAX;
    let n = g.n();
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut comp = vec![UNSEEN; n];
    let mut next_index = 0;
    let mut next_comp = 0;
    // (node, position in successor list)
    let mut call: Vec<(usize, usize)> = Vec::new();

    for root in 0..n {
        if index[root] != UNSEEN {
            continue;
        }
        call.push((root, 0));
        index[root] = next_index;
        low[root] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root] = true;

        while let Some(top) = call.last_mut() {
            let u = top.0;
            let succ = g.successors(u);
            if top.1 < succ.len() {
                let v = succ[top.1];
                top.1 += 1;
                if index[v] == UNSEEN {
                    index[v] = next_index;
                    low[v] = next_index;
                    next_index += 1;
                    stack.push(v);
                    on_stack[v] = true;
                    call.push((v, 0));
                } else if on_stack[v] {
                    low[u] = low[u].min(index[v]);
                }
            } else {
                call.pop();
                if let Some(&(parent, _)) = call.last() {
                    low[parent] = low[parent].min(low[u]);
                }
                if low[u] == index[u] {
                    loop {
                        let w = stack.pop().expect("tarjan stack underflow");
                        on_stack[w] = false;
                        comp[w] = next_comp;
                        if w == u {
                            break;
                        }
                    }
                    next_comp += 1;
                }
            }
        }
    }
    comp
}

/// Bow-tie decomposition around the largest strongly connected component.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BowTie {
    pub scc: Vec<usize>,
    /// Nodes that reach the core but are not in it.
    pub in_comp: Vec<usize>,
    /// Nodes reachable from the core but not in it.
    pub out_comp: Vec<usize>,
    /// Rest of the weak component that contains the core.
    pub tendrils_other: Vec<usize>,
    /// Nodes outside the weak component containing the core.
    pub outside: Vec<usize>,
    /// Nodes with zero in-degree, anywhere in the graph.
    pub payers_only: Vec<usize>,
    /// Set when the graph has no cycle and the core is a single node.
    pub degenerate: bool,
}

pub fn bow_tie(g: &PaymentGraph) -> BowTie {
    let n = g.n();
    let payers_only: Vec<usize> = (0..n).filter(|&i| g.in_degree(i) == 0).collect();
    if n == 0 {
        return BowTie {
            scc: vec![],
            in_comp: vec![],
            out_comp: vec![],
            tendrils_other: vec![],
            outside: vec![],
            payers_only,
            degenerate: true,
        };
    }
    let strong = components(g, Connectivity::Strong);
    let degenerate = strong.sizes[0] == 1;
    let scc: Vec<usize> = if degenerate {
        // largest singleton: highest total degree, lowest index on ties
        let best = (0..n)
            .max_by(|&a, &b| {
                let (da, db) = (g.in_degree(a) + g.out_degree(a), g.in_degree(b) + g.out_degree(b));
                da.cmp(&db).then(b.cmp(&a))
            })
            .expect("non-empty graph");
        vec![best]
    } else {
        strong.members(0)
    };

    let mut in_core = vec![false; n];
    scc.iter().for_each(|&i| in_core[i] = true);
    let reach = |forward: bool| {
        let mut seen = in_core.clone();
        let mut queue: VecDeque<usize> = scc.iter().copied().collect();
        while let Some(u) = queue.pop_front() {
            let next = if forward { g.successors(u) } else { g.predecessors(u) };
            for &v in next {
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen
    };
    let downstream = reach(true);
    let upstream = reach(false);

    let weak = components(g, Connectivity::Weak);
    let giant = weak.label[scc[0]];

    let mut bt = BowTie {
        scc: scc.clone(),
        in_comp: vec![],
        out_comp: vec![],
        tendrils_other: vec![],
        outside: vec![],
        payers_only,
        degenerate,
    };
    for i in 0..n {
        if in_core[i] {
            continue;
        }
        if weak.label[i] != giant {
            bt.outside.push(i);
        } else if upstream[i] {
            bt.in_comp.push(i);
        } else if downstream[i] {
            bt.out_comp.push(i);
        } else {
            bt.tendrils_other.push(i);
        }
    }
    bt.scc.sort_unstable();
    bt
}

#[cfg(test)]
mod tests {
    use super::super::testutil::graph;
    use super::*;
    use proptest::prelude::*;

    fn closure(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<bool>> {
        let mut r = vec![vec![false; n]; n];
        for i in 0..n {
            r[i][i] = true;
        }
        for &(u, v) in edges {
            r[u][v] = true;
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    if r[i][k] && r[k][j] {
                        r[i][j] = true;
                    }
                }
            }
        }
        r
    }

    #[test]
    fn cycle_plus_dyad() {
        let g = graph(5, &[(0, 1), (1, 0), (2, 3)]);
        let weak = components(&g, Connectivity::Weak);
        assert_eq!(weak.groups(), vec![vec![0, 1], vec![2, 3], vec![4]]);
        let strong = components(&g, Connectivity::Strong);
        assert_eq!(strong.sizes, vec![2, 1, 1, 1]);
        assert_eq!(strong.label[0], strong.label[1]);
        assert_ne!(strong.label[2], strong.label[3]);
    }

    #[test]
    fn dag_chain_singletons() {
        let g = graph(5, &[(0, 1), (1, 2), (2, 3), (3, 4)]);
        assert_eq!(components(&g, Connectivity::Strong).count(), 5);
        assert_eq!(components(&g, Connectivity::Weak).count(), 1);
    }

    #[test]
    fn strong_matches_closure_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let n = 50;
            let edges: Vec<(usize, usize)> = (0..n)
                .flat_map(|u| (0..n).map(move |v| (u, v)))
                .filter(|&(u, v)| u != v)
                .filter(|_| rng.random::<f64>() < 0.03)
                .collect();
            let g = graph(n, &edges);
            let r = closure(n, &edges);
            let strong = components(&g, Connectivity::Strong);
            for i in 0..n {
                for j in 0..n {
                    let mutual = r[i][j] && r[j][i];
                    assert_eq!(strong.label[i] == strong.label[j], mutual, "{i} {j}");
                }
            }
        }
    }

    #[test]
    fn bow_tie_upstream() {
        // A -> B -> C -> B
        let g = graph(3, &[(0, 1), (1, 2), (2, 1)]);
        let bt = bow_tie(&g);
        assert_eq!(bt.scc, vec![1, 2]);
        assert_eq!(bt.in_comp, vec![0]);
        assert!(bt.out_comp.is_empty());
        assert_eq!(bt.payers_only, vec![0]);
        assert!(!bt.degenerate);
    }

    #[test]
    fn bow_tie_dag_is_flagged() {
        let g = graph(4, &[(0, 1), (1, 2), (3, 1)]);
        let bt = bow_tie(&g);
        assert!(bt.degenerate);
        assert_eq!(bt.scc, vec![1]);
        assert_eq!(bt.in_comp, vec![0, 3]);
        assert_eq!(bt.out_comp, vec![2]);
    }

    proptest! {
        #[test]
        fn strong_refines_weak_and_bow_tie_partitions(
            n in 2usize..30,
            raw in proptest::collection::vec((0usize..30, 0usize..30), 0..80),
        ) {
            let edges: Vec<(usize, usize)> = raw.into_iter()
                .map(|(u, v)| (u % n, v % n))
                .filter(|(u, v)| u != v)
                .collect();
            let g = graph(n, &edges);
            let weak = components(&g, Connectivity::Weak);
            let strong = components(&g, Connectivity::Strong);
            for i in 0..n {
                for j in 0..n {
                    if strong.label[i] == strong.label[j] {
                        prop_assert_eq!(weak.label[i], weak.label[j]);
                    }
                }
            }
            let bt = bow_tie(&g);
            let mut all: Vec<usize> = bt.scc.iter()
                .chain(&bt.in_comp).chain(&bt.out_comp)
                .chain(&bt.tendrils_other).chain(&bt.outside)
                .copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            let giant = weak.label[bt.scc[0]];
            let giant_size = (0..n).filter(|&i| weak.label[i] == giant).count();
            prop_assert_eq!(bt.scc.len() + bt.in_comp.len() + bt.out_comp.len() + bt.tendrils_other.len(), giant_size);
            for &p in &bt.payers_only {
                prop_assert_eq!(g.in_degree(p), 0);
            }
        }
    }
}
