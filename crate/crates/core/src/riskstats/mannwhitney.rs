use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Alternative hypothesis, stated for sample `a` against sample `b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    /// `a` is stochastically greater than `b`.
    Greater,
    /// `a` is stochastically smaller than `b`.
    Less,
    TwoSided,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MannWhitney {
    /// `U` statistic of sample `a`: pairs with `a > b` plus half the ties.
    pub u: f64,
    pub p_value: f64,
    pub exact: bool,
}

/// Pooled sizes up to this use the exact permutation distribution.
pub const EXACT_LIMIT: usize = 12;

/// Midranks (1-based) of the pooled sample and the tie-group sizes.
fn midranks(pooled: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..pooled.len()).collect();
    order.sort_by(|&i, &j| pooled[i].total_cmp(&pooled[j]));
    let mut ranks = vec![0.0; pooled.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && pooled[order[j + 1]] == pooled[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = r;
        }
        ties.push(j - i + 1);
        i = j + 1;
    }
    (ranks, ties)
}

pub fn mann_whitney_u(a: &[f64], b: &[f64], alternative: Alternative) -> Result<MannWhitney> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("Mann–Whitney needs two non-empty samples"));
    }
    if a.iter().chain(b).any(|x| !x.is_finite()) {
        return Err(Error::invalid("non-finite value in Mann–Whitney sample"));
    }
    let (na, nb) = (a.len(), b.len());
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, ties) = midranks(&pooled);
    let offset = (na * (na + 1)) as f64 / 2.0;
    let u = ranks[..na].iter().sum::<f64>() - offset;
    let mean = (na * nb) as f64 / 2.0;

    if na + nb <= EXACT_LIMIT {
        let p_value = exact_p(&ranks, na, u, mean, offset, alternative);
        return Ok(MannWhitney { u, p_value, exact: true });
    }

    let n = (na + nb) as f64;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / (n * (n - 1.0));
    let var = (na * nb) as f64 / 12.0 * ((n + 1.0) - tie_term);
    if var <= 0.0 {
        // every value tied
        return Ok(MannWhitney { u, p_value: 1.0, exact: false });
    }
    let sd = var.sqrt();
    let upper = |x: f64| 0.5 * statrs::function::erf::erfc(x / std::f64::consts::SQRT_2);
    let p_value = match alternative {
        Alternative::Greater => upper((u - mean - 0.5) / sd),
        Alternative::Less => upper((mean - u - 0.5) / sd),
        Alternative::TwoSided => (2.0 * upper(((u - mean).abs() - 0.5) / sd)).min(1.0),
    };
    Ok(MannWhitney { u, p_value, exact: false })
}

/// Permutation distribution of `U` over every size-`na` subset of the pooled ranks.
fn exact_p(ranks: &[f64], na: usize, u_obs: f64, mean: f64, offset: f64, alternative: Alternative) -> f64 {
    const EPS: f64 = 1e-9;
    let n = ranks.len();
    let mut hits = 0u64;
    let mut total = 0u64;
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != na {
            continue;
        }
        let u: f64 = (0..n).filter(|&i| mask >> i & 1 == 1).map(|i| ranks[i]).sum::<f64>() - offset;
        total += 1;
        let extreme = match alternative {
            Alternative::Greater => u >= u_obs - EPS,
            Alternative::Less => u <= u_obs + EPS,
            Alternative::TwoSided => (u - mean).abs() >= (u_obs - mean).abs() - EPS,
        };
        hits += extreme as u64;
    }
    hits as f64 / total as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn four_point_example() {
        let r = mann_whitney_u(&[1.0, 2.0], &[3.0, 4.0], Alternative::Less).unwrap();
        assert_eq!(r.u, 0.0);
        assert!(r.exact);
        assert!((r.p_value - 1.0 / 6.0).abs() < 1e-15);
        let g = mann_whitney_u(&[3.0, 4.0], &[1.0, 2.0], Alternative::Greater).unwrap();
        assert!((g.p_value - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn identical_samples() {
        let x = [0.3, 1.2, 2.2, 4.0, 5.5];
        assert!(mann_whitney_u(&x, &x, Alternative::TwoSided).unwrap().p_value >= 0.9);
        let big: Vec<f64> = (0..40).map(f64::from).collect();
        assert!(mann_whitney_u(&big, &big, Alternative::TwoSided).unwrap().p_value >= 0.9);
    }

    #[test]
    fn shifted_normals() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        let d = Normal::new(0.0, 1.0).unwrap();
        let a: Vec<f64> = (0..200).map(|_| d.sample(&mut rng) + 1.0).collect();
        let b: Vec<f64> = (0..200).map(|_| d.sample(&mut rng)).collect();
        let r = mann_whitney_u(&a, &b, Alternative::Greater).unwrap();
        assert!(!r.exact);
        assert!(r.p_value < 1e-4);
        assert!(mann_whitney_u(&a, &b, Alternative::Less).unwrap().p_value > 0.99);
    }

    #[test]
    fn u_counts_pairs() {
        let a = [1.0, 3.0, 3.0, 7.0];
        let b = [2.0, 3.0, 8.0];
        let mut want = 0.0;
        for x in a {
            for y in b {
                want += if x > y { 1.0 } else if x == y { 0.5 } else { 0.0 };
            }
        }
        assert_eq!(mann_whitney_u(&a, &b, Alternative::TwoSided).unwrap().u, want);
    }

    #[test]
    fn all_tied_large_sample() {
        let r = mann_whitney_u(&[1.0; 10], &[1.0; 10], Alternative::Greater).unwrap();
        assert_eq!(r.p_value, 1.0);
    }
}
