//! Unordered modules by modularity maximization, ordered hierarchy by agony
//! minimization, and per-group rating enrichment.

mod agony;
mod modularity;

use serde::{Deserialize, Serialize};

pub use agony::{
    agony, condensation_layering, eades_order, edge_cost, heuristic_ranks, hierarchy, minimize_agony,
    partition_from_ranks, AgonyMode, EXACT_MAX_N,
};
pub use modularity::{louvain, louvain_best, louvain_with, modularity, modularity_with};

use crate::error::{Error, Result};
use crate::rating::{Rating, Risk};
use crate::riskstats::{hypergeom_test, Direction, EnrichmentResult};

/// Node-to-group map with groups numbered `1..=n_groups`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedPartition {
    pub assignment: Vec<usize>,
    /// Group ids are ranks (1 = lowest) rather than arbitrary labels.
    pub ordered: bool,
    pub n_groups: usize,
    /// Modularity `Q` for modules, hierarchy `h` for rankings.
    pub score: f64,
    /// Aggregation levels used by Louvain.
    pub levels: usize,
    pub agony: Option<u64>,
    /// The agony came from the exact solver.
    pub exact: bool,
}

impl RankedPartition {
    pub fn group_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n_groups];
        self.assignment.iter().for_each(|&g| sizes[g - 1] += 1);
        sizes
    }
}

/// Relabels arbitrary group ids to `1..=M` by decreasing size, equal sizes
/// ordered by smallest member.
pub(crate) fn relabel_by_size(raw: &[usize]) -> (Vec<usize>, usize) {
    let k = raw.iter().max().map_or(0, |&x| x + 1);
    let mut size = vec![0usize; k];
    let mut first = vec![usize::MAX; k];
    for (i, &c) in raw.iter().enumerate() {
        size[c] += 1;
        first[c] = first[c].min(i);
    }
    let mut order: Vec<usize> = (0..k).filter(|&c| size[c] > 0).collect();
    order.sort_by(|&a, &b| size[b].cmp(&size[a]).then(first[a].cmp(&first[b])));
    let mut map = vec![0usize; k];
    for (new, &old) in order.iter().enumerate() {
        map[old] = new + 1;
    }
    (raw.iter().map(|&c| map[c]).collect(), order.len())
}

/// Normalized mutual information with arithmetic-mean normalization.
/// Two single-group labelings score 1.
pub fn nmi(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::invalid("labelings must be non-empty and of equal length"));
    }
    let n = a.len() as f64;
    let mut joint = std::collections::HashMap::<(usize, usize), f64>::new();
    let mut pa = std::collections::HashMap::<usize, f64>::new();
    let mut pb = std::collections::HashMap::<usize, f64>::new();
    for (&x, &y) in a.iter().zip(b) {
        *joint.entry((x, y)).or_default() += 1.0;
        *pa.entry(x).or_default() += 1.0;
        *pb.entry(y).or_default() += 1.0;
    }
    let h = |m: &std::collections::HashMap<usize, f64>| -> f64 {
        m.values().map(|&c| -(c / n) * (c / n).ln()).sum()
    };
    let (ha, hb) = (h(&pa), h(&pb));
    if ha == 0.0 && hb == 0.0 {
        return Ok(1.0);
    }
    let mi: f64 = joint
        .iter()
        .map(|(&(x, y), &c)| (c / n) * ((c * n) / (pa[&x] * pb[&y])).ln())
        .sum();
    Ok((2.0 * mi / (ha + hb)).clamp(0.0, 1.0))
}

pub const DEFAULT_MIN_RATED: usize = 500;
pub const DEFAULT_P_S: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupProfiles {
    pub results: Vec<EnrichmentResult>,
    /// `(group, rated members)` for groups below the threshold.
    pub skipped: Vec<(usize, usize)>,
    pub tested: usize,
    pub total_groups: usize,
    /// Rated nodes per class in the analyzed graph.
    pub population: [u64; 3],
    pub min_rated: usize,
    pub p_s: f64,
}

/// Significant over- and under-representation counts per rating.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSummary {
    pub over: [usize; 3],
    pub under: [usize; 3],
    pub tested: usize,
    pub total_groups: usize,
}

impl GroupProfiles {
    pub fn summary(&self) -> ProfileSummary {
        let mut over = [0; 3];
        let mut under = [0; 3];
        for r in self.results.iter().filter(|r| r.test.significant) {
            match r.test.direction {
                Direction::Over => over[r.rating.index()] += 1,
                Direction::Under => under[r.rating.index()] += 1,
            }
        }
        ProfileSummary { over, under, tested: self.tested, total_groups: self.total_groups }
    }
}

/// Hypergeometric L/M/H tests for every group with at least `min_rated`
/// rated members, Bonferroni-corrected over `3 × tested` tests.
pub fn group_risk_profiles(
    partition: &RankedPartition,
    ratings: &[Rating],
    min_rated: usize,
    p_s: f64,
) -> Result<GroupProfiles> {
    if ratings.len() != partition.assignment.len() {
        return Err(Error::invalid(format!(
            "{} ratings for {} assigned nodes",
            ratings.len(),
            partition.assignment.len()
        )));
    }
    let m = partition.n_groups;
    let mut counts = vec![[0u64; 3]; m];
    let mut population = [0u64; 3];
    for (&g, r) in partition.assignment.iter().zip(ratings) {
        if g == 0 || g > m {
            return Err(Error::invalid(format!("group id {g} outside 1..={m}")));
        }
        if let Some(r) = r.risk() {
            counts[g - 1][r.index()] += 1;
            population[r.index()] += 1;
        }
    }
    let n_rated: u64 = population.iter().sum();
    let (tested_groups, skipped): (Vec<usize>, Vec<usize>) =
        (0..m).partition(|&g| counts[g].iter().sum::<u64>() as usize >= min_rated.max(1));
    let n_tests = 3 * tested_groups.len();
    let mut results = Vec::with_capacity(n_tests);
    for &g in &tested_groups {
        let n_g: u64 = counts[g].iter().sum();
        for r in Risk::ALL {
            let test = hypergeom_test(counts[g][r.index()], n_g, population[r.index()], n_rated, n_tests, p_s)?;
            results.push(EnrichmentResult { group: g + 1, rating: r, test });
        }
    }
    Ok(GroupProfiles {
        results,
        skipped: skipped.into_iter().map(|g| (g + 1, counts[g].iter().sum::<u64>() as usize)).collect(),
        tested: tested_groups.len(),
        total_groups: m,
        population,
        min_rated,
        p_s,
    })
}
