//! Risk–topology statistics: ratings conditional on degree and on distance,
//! hypergeometric enrichment tests, excess-volume distributions.

mod hypergeom;
mod logit;
mod mannwhitney;

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use hypergeom::{hypergeom_pmf, hypergeom_tail, hypergeom_test, Direction, EnrichmentResult, HypergeomTest};
pub use logit::{
    fit_cumulative_logit, fit_logistic, logistic_objective, BinaryLogit, CumulativeLogitModel, COEF_CAP,
};
pub use mannwhitney::{mann_whitney_u, Alternative, MannWhitney, EXACT_LIMIT};

use crate::error::{Error, Result};
use crate::graph::{bfs_directed, PaymentGraph, UNREACHABLE};
use crate::metrics::MixingMatrix;
use crate::rating::Risk;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Flow {
    In,
    Out,
}

impl fmt::Display for Flow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Flow::In => "in",
            Flow::Out => "out",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeRow {
    pub degree: usize,
    pub counts: [usize; 3],
    pub shares: [f64; 3],
}

/// Rating shares among rated nodes of each observed degree.
pub fn rating_given_degree(g: &PaymentGraph, flow: Flow) -> Result<Vec<DegreeRow>> {
    let mut table: BTreeMap<usize, [usize; 3]> = BTreeMap::new();
    for i in 0..g.n() {
        if let Some(r) = g.node(i).rating.risk() {
            let k = match flow {
                Flow::In => g.in_degree(i),
                Flow::Out => g.out_degree(i),
            };
            table.entry(k).or_default()[r.index()] += 1;
        }
    }
    if table.is_empty() {
        return Err(Error::invalid("no rated nodes"));
    }
    Ok(table
        .into_iter()
        .map(|(degree, counts)| {
            let t = counts.iter().sum::<usize>() as f64;
            DegreeRow { degree, counts, shares: counts.map(|c| c as f64 / t) }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceRow {
    pub k: usize,
    /// Pairs at distance `k` whose target is rated L, M, H.
    pub counts: [u64; 3],
    pub pairs: u64,
    pub shares: [f64; 3],
    pub tests: [HypergeomTest; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceTable {
    pub source: Risk,
    pub k_max: usize,
    /// Unconditional rating shares among rated nodes.
    pub null_shares: [f64; 3],
    pub rows: Vec<DistanceRow>,
}

pub const DEFAULT_K_MAX: usize = 13;

/// Ratings of rated targets at directed hop distance `k` from rated sources
/// of class `source`, pooled over source–target pairs.
///
/// Each shell is tested against the null by a hypergeometric over ordered
/// pairs: the population holds every (source, other rated node) pair, and the
/// successes are those whose target carries the tested rating.
pub fn distance_conditional_ratings(g: &PaymentGraph, source: Risk, k_max: usize, p_s: f64) -> Result<DistanceTable> {
    if k_max == 0 {
        return Err(Error::invalid("k_max must be at least 1"));
    }
    let rating: Vec<Option<Risk>> = g.nodes().iter().map(|f| f.rating.risk()).collect();
    let mut big_k = [0u64; 3];
    rating.iter().flatten().for_each(|r| big_k[r.index()] += 1);
    let n_rated: u64 = big_k.iter().sum();
    if n_rated == 0 {
        return Err(Error::invalid("no rated nodes"));
    }
    let sources: Vec<usize> = (0..g.n()).filter(|&i| rating[i] == Some(source)).collect();

    let counts = sources
        .par_iter()
        .fold(
            || vec![[0u64; 3]; k_max + 1],
            |mut acc, &s| {
                let dist = bfs_directed(g, s, k_max);
                for (v, &d) in dist.iter().enumerate() {
                    if d != UNREACHABLE && d > 0 {
                        if let Some(r) = rating[v] {
                            acc[d][r.index()] += 1;
                        }
                    }
                }
                acc
            },
        )
        .reduce(
            || vec![[0u64; 3]; k_max + 1],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    for c in 0..3 {
                        x[c] += y[c];
                    }
                }
                a
            },
        );

    let s = sources.len() as u64;
    let population = s * (n_rated - 1);
    let successes: [u64; 3] =
        std::array::from_fn(|c| s * big_k[c] - if c == source.index() { s } else { 0 });
    let shells: Vec<usize> = (1..=k_max).filter(|&k| counts[k].iter().sum::<u64>() > 0).collect();
    let n_tests = 3 * shells.len();
    let mut rows = Vec::with_capacity(shells.len());
    for k in shells {
        let c = counts[k];
        let pairs: u64 = c.iter().sum();
        let mut tests = Vec::with_capacity(3);
        for x in 0..3 {
            tests.push(hypergeom_test(c[x], pairs, successes[x], population, n_tests, p_s)?);
        }
        rows.push(DistanceRow {
            k,
            counts: c,
            pairs,
            shares: c.map(|v| v as f64 / pairs as f64),
            tests: tests.try_into().expect("three tests"),
        });
    }
    Ok(DistanceTable {
        source,
        k_max,
        null_shares: big_k.map(|v| v as f64 / n_rated as f64),
        rows,
    })
}

/// Excess-volume values `Δ` of nodes rated `rating` toward class `target`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcessSample {
    pub flow: Flow,
    pub rating: Risk,
    pub target: Risk,
    pub values: Vec<f64>,
}

impl ExcessSample {
    pub fn label(&self) -> String {
        format!("F{}_{}({})", self.flow, self.rating.as_str(), self.target.as_str())
    }
}

/// The 18 excess-volume distributions on the subgraph of rated nodes.
///
/// Out-values use `(w_out(X) − ã_r b̃_X) / (1 − ã_r b̃_X)`, in-values use
/// `(w_in(X) − ã_X b̃_r) / (1 − ã_X b̃_r)` with `ã`, `b̃` the row and column
/// sums of the volume mixing matrix.
pub fn excess_volume_samples(g: &PaymentGraph) -> Result<Vec<ExcessSample>> {
    let rating: Vec<Option<Risk>> = g.nodes().iter().map(|f| f.rating.risk()).collect();
    let mut vol = vec![vec![0.0; 3]; 3];
    // per node volume toward / from each class
    let mut out_to = vec![[0.0f64; 3]; g.n()];
    let mut in_from = vec![[0.0f64; 3]; g.n()];
    for (u, v, w) in g.edges() {
        if let (Some(ru), Some(rv)) = (rating[u], rating[v]) {
            vol[ru.index()][rv.index()] += w;
            out_to[u][rv.index()] += w;
            in_from[v][ru.index()] += w;
        }
    }
    let mix = MixingMatrix::from_counts(vol)?;
    let mut samples = Vec::with_capacity(18);
    for flow in [Flow::Out, Flow::In] {
        for r in Risk::ALL {
            for x in Risk::ALL {
                let expect = match flow {
                    Flow::Out => mix.a[r.index()] * mix.b[x.index()],
                    Flow::In => mix.a[x.index()] * mix.b[r.index()],
                };
                if (1.0 - expect).abs() < 1e-15 {
                    return Err(Error::Undefined(format!("expected volume share of 1 for {r:?}->{x:?}")));
                }
                let values = (0..g.n())
                    .filter(|&i| rating[i] == Some(r))
                    .filter_map(|i| {
                        let row = match flow {
                            Flow::Out => &out_to[i],
                            Flow::In => &in_from[i],
                        };
                        let total: f64 = row.iter().sum();
                        (total > 0.0).then(|| (row[x.index()] / total - expect) / (1.0 - expect))
                    })
                    .collect();
                samples.push(ExcessSample { flow, rating: r, target: x, values });
            }
        }
    }
    Ok(samples)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcessComparison {
    pub a: String,
    pub b: String,
    pub u: f64,
    /// `a` stochastically greater than `b`.
    pub p_greater: f64,
    pub p_two_sided: f64,
}

/// Mann–Whitney comparisons between excess-volume distributions: out versus
/// in for each (rating, target), then every pair of targets for each
/// (rating, direction). Empty samples are skipped.
pub fn compare_excess(samples: &[ExcessSample]) -> Result<Vec<ExcessComparison>> {
    let find = |flow: Flow, r: Risk, x: Risk| {
        samples.iter().find(|s| s.flow == flow && s.rating == r && s.target == x)
    };
    let mut pairs = Vec::new();
    for r in Risk::ALL {
        for x in Risk::ALL {
            if let (Some(a), Some(b)) = (find(Flow::Out, r, x), find(Flow::In, r, x)) {
                pairs.push((a, b));
            }
        }
    }
    for r in Risk::ALL {
        for flow in [Flow::Out, Flow::In] {
            for (x, y) in [(Risk::L, Risk::M), (Risk::L, Risk::H), (Risk::M, Risk::H)] {
                if let (Some(a), Some(b)) = (find(flow, r, x), find(flow, r, y)) {
                    pairs.push((a, b));
                }
            }
        }
    }
    let mut out = Vec::new();
    for (a, b) in pairs {
        if a.values.is_empty() || b.values.is_empty() {
            continue;
        }
        let g = mann_whitney_u(&a.values, &b.values, Alternative::Greater)?;
        let t = mann_whitney_u(&a.values, &b.values, Alternative::TwoSided)?;
        out.push(ExcessComparison { a: a.label(), b: b.label(), u: g.u, p_greater: g.p_value, p_two_sided: t.p_value });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::mixing_matrix;
    use crate::rating::{FirmMeta, Rating};

    fn rated(ratings: &[Rating], edges: &[(usize, usize, f64)]) -> PaymentGraph {
        let nodes = ratings
            .iter()
            .enumerate()
            .map(|(i, &r)| FirmMeta { rating: r, ..FirmMeta::unknown(format!("f{i:03}")) })
            .collect();
        PaymentGraph::new(nodes, edges.to_vec()).unwrap()
    }

    #[test]
    fn degree_table_rows_normalized() {
        let g = rated(&[Rating::M, Rating::M, Rating::NA], &[(0, 1, 1.0), (1, 0, 1.0), (2, 0, 1.0)]);
        let t = rating_given_degree(&g, Flow::Out).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].degree, 1);
        assert_eq!(t[0].shares, [0.0, 1.0, 0.0]);
        let none = rated(&[Rating::NA, Rating::NA], &[(0, 1, 1.0)]);
        assert!(rating_given_degree(&none, Flow::In).is_err());
    }

    #[test]
    fn chain_shells() {
        let g = rated(&[Rating::L, Rating::M, Rating::H], &[(0, 1, 1.0), (1, 2, 1.0)]);
        let t = distance_conditional_ratings(&g, Risk::L, DEFAULT_K_MAX, 0.01).unwrap();
        assert_eq!(t.rows.len(), 2);
        assert_eq!(t.rows[0].shares, [0.0, 1.0, 0.0]);
        assert_eq!(t.rows[1].shares, [0.0, 0.0, 1.0]);
        for row in &t.rows {
            assert!((row.shares.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn first_shell_matches_mixing_row() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        let n = 80;
        let ratings: Vec<Rating> = (0..n).map(|_| Rating::from_category(rng.random_range(0..3))).collect();
        let mut edges = Vec::new();
        for u in 0..n {
            for v in 0..n {
                if u != v && rng.random::<f64>() < 0.05 {
                    edges.push((u, v, 1.0));
                }
            }
        }
        let g = rated(&ratings, &edges);
        let labels: Vec<usize> = ratings.iter().map(|r| r.category()).collect();
        let row = mixing_matrix(&g, &labels, 3, false).unwrap().row_normalized();
        for src in Risk::ALL {
            let t = distance_conditional_ratings(&g, src, 3, 0.01).unwrap();
            assert_eq!(t.rows[0].k, 1);
            for x in 0..3 {
                assert!((t.rows[0].shares[x] - row[src.index()][x]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn excess_anchors() {
        // node 0 (L) sends only to L nodes
        let g = rated(
            &[Rating::L, Rating::L, Rating::M, Rating::H],
            &[(0, 1, 10.0), (1, 2, 5.0), (2, 3, 5.0), (3, 0, 5.0), (2, 1, 5.0)],
        );
        let s = excess_volume_samples(&g).unwrap();
        assert_eq!(s.len(), 18);
        let out_l_l = s.iter().find(|x| x.flow == Flow::Out && x.rating == Risk::L && x.target == Risk::L).unwrap();
        assert!(out_l_l.values.iter().any(|&v| (v - 1.0).abs() < 1e-12));
        assert!(s.iter().flat_map(|x| &x.values).all(|&v| v <= 1.0 + 1e-12));
    }

    #[test]
    fn excess_hand_enumeration() {
        let g = rated(
            &[Rating::L, Rating::M, Rating::H, Rating::L],
            &[(0, 1, 4.0), (0, 2, 4.0), (1, 2, 2.0), (2, 3, 6.0), (3, 0, 4.0)],
        );
        // volume mixing: L->M 4, L->H 4, M->H 2, H->L 6, L->L 4; total 20
        let a = [12.0 / 20.0, 2.0 / 20.0, 6.0 / 20.0];
        let b = [10.0 / 20.0, 4.0 / 20.0, 6.0 / 20.0];
        let d = |w: f64, e: f64| (w - e) / (1.0 - e);
        let s = excess_volume_samples(&g).unwrap();
        let get = |flow, r, x| s.iter().find(|v| v.flow == flow && v.rating == r && v.target == x).unwrap().values.clone();
        // out of L nodes toward M: node 0 sends 4/8, node 3 sends 0/4
        let close = |got: Vec<f64>, want: Vec<f64>| {
            assert_eq!(got.len(), want.len());
            got.iter().zip(&want).for_each(|(x, y)| assert!((x - y).abs() < 1e-12, "{got:?} vs {want:?}"));
        };
        close(get(Flow::Out, Risk::L, Risk::M), vec![d(0.5, a[0] * b[1]), d(0.0, a[0] * b[1])]);
        // into H (node 2) from L: 4 of 6
        close(get(Flow::In, Risk::H, Risk::L), vec![d(4.0 / 6.0, a[0] * b[2])]);
        // into M from H: none of node 1's inflow
        close(get(Flow::In, Risk::M, Risk::H), vec![d(0.0, a[2] * b[1])]);
        let cmp = compare_excess(&s).unwrap();
        assert!(cmp.iter().all(|c| (0.0..=1.0).contains(&c.p_two_sided)));
    }
}
