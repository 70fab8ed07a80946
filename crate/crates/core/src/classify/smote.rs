//! Synthetic minority oversampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

pub const DEFAULT_K: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct SmoteOutput {
    pub samples: Vec<Vec<f64>>,
    /// Neighbor count actually used; smaller than requested for tiny classes.
    pub k_used: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `k` nearest other minority points of each minority point, ties by index.
fn neighbors(minority: &[Vec<f64>], k: usize) -> Vec<Vec<usize>> {
    (0..minority.len())
        .into_par_iter()
        .map(|i| {
            let mut d: Vec<(f64, usize)> =
                (0..minority.len()).filter(|&j| j != i).map(|j| (sq_dist(&minority[i], &minority[j]), j)).collect();
            let k = k.min(d.len());
            d.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            d.truncate(k);
            d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            d.into_iter().map(|(_, j)| j).collect()
        })
        .collect()
}

/// Draws `n_new` points `x + u·(x_nn − x)`, cycling through the minority
/// points as bases and picking `x_nn` among their `k` nearest minority
/// neighbors. An oversampling factor `f` corresponds to
/// `n_new = (f − 1) · minority.len()`.
pub fn smote(minority: &[Vec<f64>], k: usize, n_new: usize, seed: u64) -> Result<SmoteOutput> {
    if n_new == 0 {
        return Ok(SmoteOutput { samples: Vec::new(), k_used: k });
    }
    if minority.len() < 2 {
        return Err(Error::invalid("SMOTE needs at least two minority samples"));
    }
    if k == 0 {
        return Err(Error::invalid("SMOTE needs k ≥ 1"));
    }
    let k_used = if minority.len() <= k {
        log::warn!("minority class has {} samples; SMOTE k reduced from {k} to {}", minority.len(), minority.len() - 1);
        minority.len() - 1
    } else {
        k
    };
    let nn = neighbors(minority, k_used);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = (0..n_new)
        .map(|s| {
            let i = s % minority.len();
            let j = nn[i][rng.random_range(0..k_used)];
            let u: f64 = rng.random();
            minority[i].iter().zip(&minority[j]).map(|(a, b)| a + u * (b - a)).collect()
        })
        .collect();
    Ok(SmoteOutput { samples, k_used })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_bounds() {
        let out = smote(&[vec![0.0], vec![1.0]], 5, 50, 1).unwrap();
        assert_eq!(out.k_used, 1);
        assert!(out.samples.iter().all(|s| (0.0..=1.0).contains(&s[0])));
    }

    #[test]
    fn factor_two_doubles_the_class() {
        let minority: Vec<Vec<f64>> = (0..100).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let out = smote(&minority, 5, 100, 2).unwrap();
        assert_eq!(out.samples.len() + minority.len(), 200);
    }

    #[test]
    fn synthetic_points_lie_on_neighbor_segments() {
        let minority: Vec<Vec<f64>> = (0..30).map(|i| vec![(i % 6) as f64, (i / 6) as f64 * 0.7]).collect();
        let out = smote(&minority, 3, 200, 3).unwrap();
        let (lo, hi) = (|d: usize| minority.iter().map(|p| p[d]).fold(f64::INFINITY, f64::min),
                        |d: usize| minority.iter().map(|p| p[d]).fold(f64::NEG_INFINITY, f64::max));
        for s in &out.samples {
            // on a segment from some point to one of its neighbors
            let on_segment = minority.iter().any(|a| {
                minority.iter().any(|b| {
                    let t = if b[0] != a[0] { (s[0] - a[0]) / (b[0] - a[0]) } else { (s[1] - a[1]) / (b[1] - a[1]) };
                    (0.0..=1.0).contains(&t)
                        && (0..2).all(|d| (a[d] + t * (b[d] - a[d]) - s[d]).abs() < 1e-9)
                })
            });
            assert!(on_segment, "{s:?}");
            assert!((0..2).all(|d| s[d] >= lo(d) && s[d] <= hi(d)));
        }
        assert_eq!(out, smote(&minority, 3, 200, 3).unwrap());
    }

    #[test]
    fn tiny_minority() {
        assert!(smote(&[vec![1.0]], 5, 3, 0).is_err());
        assert_eq!(smote(&[vec![1.0]], 5, 0, 0).unwrap().samples.len(), 0);
    }
}
