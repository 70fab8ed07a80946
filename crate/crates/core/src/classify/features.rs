//! Network-only predictors and their preprocessing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::PaymentGraph;
use crate::partition::RankedPartition;
use crate::rating::{Rating, Risk};

pub const N_FEATURES: usize = 25;
/// Modules kept as their own indicator; the rest share a residual column.
pub const KEPT_MODULES: usize = 12;
pub const DEFAULT_MIN_MODULE_SIZE: usize = 500;

pub const IN_DEGREE: usize = 0;
pub const OUT_DEGREE: usize = 1;
/// In-volume fractions from H, M, L, NA neighbors.
pub const IN_FRACTIONS: usize = 2;
/// Out-volume fractions to H, M, L, NA neighbors.
pub const OUT_FRACTIONS: usize = 6;
pub const RANK: usize = 10;
pub const MODULES: usize = 11;
pub const SIZE: usize = 24;

/// Column names in feature order.
pub fn feature_names() -> Vec<String> {
    let mut names = vec!["in_degree".to_string(), "out_degree".to_string()];
    for dir in ["in", "out"] {
        for r in ["H", "M", "L", "NA"] {
            names.push(format!("{dir}_frac_{r}"));
        }
    }
    names.push("rank".into());
    names.extend((1..=KEPT_MODULES).map(|i| format!("module_{i}")));
    names.push("module_rest".into());
    names.push("size".into());
    names
}

/// Maps values to their empirical CDF position, interpolating linearly
/// between reference quantiles. Ties map to the middle of their run, so the
/// median maps to 0.5.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileTransform {
    pub references: Vec<f64>,
}

impl QuantileTransform {
    pub const MAX_REFERENCES: usize = 1000;

    pub fn fit(values: &[f64]) -> Result<Self> {
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("quantile transform needs finite values"));
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let k = sorted.len().min(Self::MAX_REFERENCES);
        let references = if k == 1 {
            vec![sorted[0]]
        } else {
            (0..k)
                .map(|i| {
                    let pos = i as f64 * (sorted.len() - 1) as f64 / (k - 1) as f64;
                    let (lo, frac) = (pos.floor() as usize, pos.fract());
                    let hi = (lo + 1).min(sorted.len() - 1);
                    sorted[lo] + frac * (sorted[hi] - sorted[lo])
                })
                .collect()
        };
        Ok(QuantileTransform { references })
    }

    pub fn transform(&self, x: f64) -> f64 {
        let q = &self.references;
        let k = q.len();
        if k == 1 {
            return 0.5;
        }
        if x < q[0] {
            return 0.0;
        }
        if x > q[k - 1] {
            return 1.0;
        }
        let step = 1.0 / (k - 1) as f64;
        // position from the left and from the right, averaged for ties
        let lo = q.partition_point(|&r| r < x);
        let hi = q.partition_point(|&r| r <= x);
        if lo == hi {
            // strictly between q[lo - 1] and q[lo]
            let (a, b) = (q[lo - 1], q[lo]);
            return (lo as f64 - 1.0 + (x - a) / (b - a)) * step;
        }
        // x equals references lo..hi; take the middle of the run
        (lo + hi - 1) as f64 / 2.0 * step
    }
}

/// Fitted preprocessing parameters, stored with every model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocessor {
    pub in_degree: QuantileTransform,
    pub out_degree: QuantileTransform,
    pub size: QuantileTransform,
    pub rank_mean: f64,
    pub rank_std: f64,
    /// Module ids with their own indicator column, in column order.
    pub kept_modules: Vec<usize>,
    pub min_module_size: usize,
}

/// Raw per-node quantities before preprocessing.
#[derive(Debug, Clone, PartialEq)]
struct RawFeatures {
    log_in: Vec<f64>,
    log_out: Vec<f64>,
    log_size: Vec<f64>,
    rank: Vec<f64>,
    in_frac: Vec<[f64; 4]>,
    out_frac: Vec<[f64; 4]>,
}

/// Neighbor slots ordered H, M, L, NA.
fn slot(r: Rating) -> usize {
    match r {
        Rating::Known(Risk::H) => 0,
        Rating::Known(Risk::M) => 1,
        Rating::Known(Risk::L) => 2,
        Rating::NA => 3,
    }
}

fn raw_features(g: &PaymentGraph, modules: &RankedPartition, hierarchy: &RankedPartition) -> Result<RawFeatures> {
    let n = g.n();
    for (name, p) in [("module partition", modules), ("hierarchy", hierarchy)] {
        if p.assignment.len() != n {
            return Err(Error::invalid(format!("{name} covers {} nodes, graph has {n}", p.assignment.len())));
        }
    }
    let fractions = |edges: &mut dyn Iterator<Item = (usize, f64)>| -> [f64; 4] {
        let mut f = [0.0; 4];
        for (v, w) in edges {
            f[slot(g.node(v).rating)] += w;
        }
        let total: f64 = f.iter().sum();
        if total > 0.0 {
            f.iter_mut().for_each(|x| *x /= total);
        }
        f
    };
    Ok(RawFeatures {
        log_in: (0..n).map(|i| (1.0 + g.in_degree(i) as f64).ln()).collect(),
        log_out: (0..n).map(|i| (1.0 + g.out_degree(i) as f64).ln()).collect(),
        log_size: (0..n).map(|i| (1.0 + g.in_strength(i) + g.out_strength(i)).ln()).collect(),
        rank: hierarchy.assignment.iter().map(|&r| r as f64).collect(),
        in_frac: (0..n).map(|i| fractions(&mut g.in_edges(i))).collect(),
        out_frac: (0..n).map(|i| fractions(&mut g.out_edges(i))).collect(),
    })
}

impl Preprocessor {
    /// Fits quantile tables, rank standardization and the module map on
    /// every node of `g`.
    pub fn fit(
        g: &PaymentGraph,
        modules: &RankedPartition,
        hierarchy: &RankedPartition,
        min_module_size: usize,
    ) -> Result<Self> {
        if g.n() == 0 {
            return Err(Error::invalid("empty graph"));
        }
        let raw = raw_features(g, modules, hierarchy)?;
        let n = g.n() as f64;
        let rank_mean = raw.rank.iter().sum::<f64>() / n;
        let var = raw.rank.iter().map(|r| (r - rank_mean).powi(2)).sum::<f64>() / n;
        let mut sizes: Vec<(usize, usize)> = modules.group_sizes().into_iter().enumerate().map(|(i, s)| (i + 1, s)).collect();
        sizes.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        let kept_modules = sizes
            .into_iter()
            .filter(|&(_, s)| s >= min_module_size)
            .take(KEPT_MODULES)
            .map(|(id, _)| id)
            .collect();
        Ok(Preprocessor {
            in_degree: QuantileTransform::fit(&raw.log_in)?,
            out_degree: QuantileTransform::fit(&raw.log_out)?,
            size: QuantileTransform::fit(&raw.log_size)?,
            rank_mean,
            rank_std: if var > 0.0 { var.sqrt() } else { 1.0 },
            kept_modules,
            min_module_size,
        })
    }
}

/// Feature rows for every node of a graph plus the true labels where known.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub rows: Vec<[f64; N_FEATURES]>,
    pub labels: Vec<Rating>,
    /// Nodes without incoming volume; their in-fractions are all zero.
    pub zero_in: Vec<bool>,
    /// Nodes without outgoing volume; their out-fractions are all zero.
    pub zero_out: Vec<bool>,
}

impl FeatureTable {
    pub fn rated(&self) -> Vec<usize> {
        (0..self.rows.len()).filter(|&i| self.labels[i].is_known()).collect()
    }

    /// Rows and class indices for the given nodes, which must be rated.
    pub fn select(&self, nodes: &[usize]) -> Result<(Vec<Vec<f64>>, Vec<usize>)> {
        let mut x = Vec::with_capacity(nodes.len());
        let mut y = Vec::with_capacity(nodes.len());
        for &i in nodes {
            let r = self.labels.get(i).and_then(|r| r.risk()).ok_or_else(|| Error::invalid(format!("node {i} has no rating")))?;
            x.push(self.rows[i].to_vec());
            y.push(r.index());
        }
        Ok((x, y))
    }
}

/// Builds the 25 predictors for every node of `g`. Neighbor-rating
/// fractions use the ratings stored in `g`, so hide test labels there first.
pub fn build_features(
    g: &PaymentGraph,
    modules: &RankedPartition,
    hierarchy: &RankedPartition,
    pre: &Preprocessor,
) -> Result<FeatureTable> {
    let raw = raw_features(g, modules, hierarchy)?;
    let n = g.n();
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let mut row = [0.0; N_FEATURES];
        row[IN_DEGREE] = pre.in_degree.transform(raw.log_in[i]);
        row[OUT_DEGREE] = pre.out_degree.transform(raw.log_out[i]);
        row[IN_FRACTIONS..IN_FRACTIONS + 4].copy_from_slice(&raw.in_frac[i]);
        row[OUT_FRACTIONS..OUT_FRACTIONS + 4].copy_from_slice(&raw.out_frac[i]);
        row[RANK] = (raw.rank[i] - pre.rank_mean) / pre.rank_std;
        let col = pre.kept_modules.iter().position(|&m| m == modules.assignment[i]).unwrap_or(KEPT_MODULES);
        row[MODULES + col] = 1.0;
        row[SIZE] = pre.size.transform(raw.log_size[i]);
        rows.push(row);
    }
    Ok(FeatureTable {
        rows,
        labels: g.nodes().iter().map(|f| f.rating).collect(),
        zero_in: (0..n).map(|i| g.in_strength(i) == 0.0).collect(),
        zero_out: (0..n).map(|i| g.out_strength(i) == 0.0).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rating::{FirmMeta, Status};

    fn part(assignment: Vec<usize>) -> RankedPartition {
        let n_groups = *assignment.iter().max().unwrap();
        RankedPartition { assignment, ordered: false, n_groups, score: 0.0, levels: 0, agony: None, exact: false }
    }

    fn firm(id: &str, rating: Rating) -> FirmMeta {
        FirmMeta { id: id.into(), status: Status::Customer, rating, sector: None }
    }

    #[test]
    fn quantile_median_and_ties() {
        let q = QuantileTransform::fit(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!(q.transform(3.0), 0.5);
        assert_eq!(q.transform(1.0), 0.0);
        assert_eq!(q.transform(5.0), 1.0);
        assert_eq!(q.transform(0.0), 0.0);
        assert_eq!(q.transform(9.0), 1.0);
        assert!((q.transform(3.5) - 0.625).abs() < 1e-12);
        let c = QuantileTransform::fit(&[2.0; 7]).unwrap();
        assert_eq!(c.transform(2.0), 0.5);
        let t = QuantileTransform::fit(&[0.0, 1.0, 1.0, 1.0, 2.0]).unwrap();
        assert_eq!(t.transform(1.0), 0.5);
    }

    #[test]
    fn quantile_is_monotone_on_large_sample() {
        let values: Vec<f64> = (0..5000).map(|i| ((i * 7919) % 5003) as f64).collect();
        let q = QuantileTransform::fit(&values).unwrap();
        assert_eq!(q.references.len(), 1000);
        let mut last = -1.0;
        for x in (0..6000).map(|i| i as f64) {
            let t = q.transform(x);
            assert!((0.0..=1.0).contains(&t) && t >= last);
            last = t;
        }
    }

    #[test]
    fn toy_feature_rows() {
        // 0 pays only L-rated firms; 3 receives nothing
        let nodes = vec![
            firm("a", Rating::NA),
            firm("b", Rating::L),
            firm("c", Rating::L),
            firm("d", Rating::H),
        ];
        let g = PaymentGraph::new(nodes, vec![(0, 1, 2.0), (0, 2, 6.0), (3, 0, 1.0), (1, 0, 3.0)]).unwrap();
        let modules = part(vec![1, 1, 2, 2]);
        let hierarchy = part(vec![2, 1, 3, 1]);
        let pre = Preprocessor::fit(&g, &modules, &hierarchy, 2).unwrap();
        let t = build_features(&g, &modules, &hierarchy, &pre).unwrap();
        assert_eq!(feature_names().len(), N_FEATURES);
        let r0 = t.rows[0];
        assert_eq!(&r0[OUT_FRACTIONS..OUT_FRACTIONS + 4], &[0.0, 0.0, 1.0, 0.0]);
        assert_eq!(&r0[IN_FRACTIONS..IN_FRACTIONS + 4], &[0.25, 0.0, 0.75, 0.0]);
        assert!(t.zero_in[3]);
        assert_eq!(&t.rows[3][IN_FRACTIONS..IN_FRACTIONS + 4], &[0.0; 4]);
        for row in &t.rows {
            assert_eq!(row[MODULES..MODULES + 13].iter().sum::<f64>(), 1.0);
        }
        let mean: f64 = t.rows.iter().map(|r| r[RANK]).sum::<f64>() / 4.0;
        let var: f64 = t.rows.iter().map(|r| r[RANK].powi(2)).sum::<f64>() / 4.0;
        assert!(mean.abs() < 1e-12 && (var - 1.0).abs() < 1e-12);
        assert_eq!(t.rated(), vec![1, 2, 3]);
        assert!(t.select(&[0]).is_err());
    }

    #[test]
    fn small_modules_go_to_residual() {
        let g = PaymentGraph::new((0..5).map(|i| firm(&format!("n{i}"), Rating::M)).collect(), vec![(0, 1, 1.0)]).unwrap();
        let modules = part(vec![1, 1, 1, 2, 2]);
        let h = part(vec![1; 5]);
        let pre = Preprocessor::fit(&g, &modules, &h, 3).unwrap();
        assert_eq!(pre.kept_modules, vec![1]);
        let t = build_features(&g, &modules, &h, &pre).unwrap();
        assert_eq!(t.rows[0][MODULES], 1.0);
        assert_eq!(t.rows[4][MODULES + KEPT_MODULES], 1.0);
        assert!(build_features(&g, &part(vec![1, 1]), &h, &pre).is_err());
    }
}
