use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::PaymentGraph;

/// Fractions of edges (or of volume) from category `i` to category `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingMatrix {
    pub e: Vec<Vec<f64>>,
    /// Row sums.
    pub a: Vec<f64>,
    /// Column sums.
    pub b: Vec<f64>,
}

impl MixingMatrix {
    pub fn from_counts(counts: Vec<Vec<f64>>) -> Result<Self> {
        let k = counts.len();
        if counts.iter().any(|r| r.len() != k) {
            return Err(Error::invalid("mixing matrix must be square"));
        }
        let total: f64 = counts.iter().flatten().sum();
        if !(total > 0.0) {
            return Err(Error::Undefined("mixing matrix with no mass".into()));
        }
        let e: Vec<Vec<f64>> = counts.iter().map(|r| r.iter().map(|x| x / total).collect()).collect();
        let a = e.iter().map(|r| r.iter().sum()).collect();
        let b = (0..k).map(|j| e.iter().map(|r| r[j]).sum()).collect();
        Ok(MixingMatrix { e, a, b })
    }

    pub fn k(&self) -> usize {
        self.e.len()
    }

    /// Rows rescaled to sum to one; empty rows stay zero.
    pub fn row_normalized(&self) -> Vec<Vec<f64>> {
        self.e
            .iter()
            .zip(&self.a)
            .map(|(r, &s)| r.iter().map(|x| if s > 0.0 { x / s } else { 0.0 }).collect())
            .collect()
    }
}

/// Mixing matrix over `k` categories. `labels[i] < k` for every node.
pub fn mixing_matrix(g: &PaymentGraph, labels: &[usize], k: usize, weighted: bool) -> Result<MixingMatrix> {
    if labels.len() != g.n() {
        return Err(Error::invalid(format!("{} labels for {} nodes", labels.len(), g.n())));
    }
    if let Some(&bad) = labels.iter().find(|&&c| c >= k) {
        return Err(Error::invalid(format!("category {bad} out of range for {k} categories")));
    }
    let mut counts = vec![vec![0.0; k]; k];
    for (u, v, w) in g.edges() {
        counts[labels[u]][labels[v]] += if weighted { w } else { 1.0 };
    }
    MixingMatrix::from_counts(counts)
}

/// Rating categories `L=0, M=1, H=2, NA=3` for every node.
pub fn rating_labels(g: &PaymentGraph) -> Vec<usize> {
    g.nodes().iter().map(|f| f.rating.category()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Assortativity {
    pub r: f64,
    pub r_min: f64,
}

pub fn assortativity(mix: &MixingMatrix) -> Result<Assortativity> {
    let trace: f64 = (0..mix.k()).map(|i| mix.e[i][i]).sum();
    let ab: f64 = mix.a.iter().zip(&mix.b).map(|(a, b)| a * b).sum();
    if (1.0 - ab).abs() < 1e-12 {
        return Err(Error::Undefined("assortativity with a single occupied category".into()));
    }
    Ok(Assortativity { r: (trace - ab) / (1.0 - ab), r_min: -ab / (1.0 - ab) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassAttribute {
    /// In- plus out-degree.
    Degree,
    /// In- plus out-strength.
    Strength,
}

/// Logarithmic binning: value `x` goes to `⌊log_base(x / origin)⌋`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogBins {
    pub base: f64,
    pub origin: f64,
}

impl Default for LogBins {
    fn default() -> Self {
        LogBins { base: 2.0, origin: 1.0 }
    }
}

impl LogBins {
    pub fn bin(&self, x: f64) -> i64 {
        (x / self.origin).log(self.base).floor() as i64
    }
}

/// Assortativity with nodes classed by log-binned degree or strength.
pub fn degree_class_assortativity(g: &PaymentGraph, attribute: ClassAttribute, bins: LogBins) -> Result<Assortativity> {
    if !(bins.base > 1.0 && bins.origin > 0.0) {
        return Err(Error::invalid("log bins need base > 1 and origin > 0"));
    }
    let value = |i: usize| match attribute {
        ClassAttribute::Degree => (g.in_degree(i) + g.out_degree(i)) as f64,
        ClassAttribute::Strength => g.in_strength(i) + g.out_strength(i),
    };
    // isolated nodes never touch an edge; give them the lowest bin
    let raw: Vec<i64> = (0..g.n()).map(|i| if value(i) > 0.0 { bins.bin(value(i)) } else { i64::MIN }).collect();
    let mut distinct: Vec<i64> = raw.clone();
    distinct.sort_unstable();
    distinct.dedup();
    let labels: Vec<usize> = raw.iter().map(|b| distinct.binary_search(b).expect("bin present")).collect();
    assortativity(&mixing_matrix(g, &labels, distinct.len(), false)?)
}
