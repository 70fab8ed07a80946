//! Distributional statistics: CCDFs, power-law tails, assortative mixing and
//! size tertiles.

mod mixing;
mod powerlaw;

pub use mixing::{
    assortativity, degree_class_assortativity, mixing_matrix, rating_labels, Assortativity, ClassAttribute,
    LogBins, MixingMatrix,
};
pub use powerlaw::{
    hurwitz_zeta, powerlaw_fit, powerlaw_fit_with, DiscreteEstimator, PowerLawFit, PowerLawOptions, XminScan,
};

use crate::graph::PaymentGraph;

/// Empirical `P(X ≥ x)` at each sorted unique sample value.
pub fn ccdf(samples: &[f64]) -> Vec<(f64, f64)> {
    let mut x: Vec<f64> = samples.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let mut out = Vec::new();
    for (i, &v) in x.iter().enumerate() {
        if i == 0 || v != x[i - 1] {
            out.push((v, (x.len() - i) as f64 / n));
        }
    }
    out
}

/// Assigns every node a size tertile in `{1, 2, 3}` from in- plus out-strength.
///
/// Boundaries are the order statistics at ranks `⌈n/3⌉` and `⌈2n/3⌉`; a node
/// equal to a boundary goes to the lower tertile.
pub fn size_proxy_tertiles(g: &PaymentGraph) -> Vec<u8> {
    let size: Vec<f64> = (0..g.n()).map(|i| g.in_strength(i) + g.out_strength(i)).collect();
    tertiles(&size)
}

pub fn tertiles(values: &[f64]) -> Vec<u8> {
    let n = values.len();
    if n == 0 {
        return Vec::new();
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let t1 = sorted[n.div_ceil(3) - 1];
    let t2 = sorted[(2 * n).div_ceil(3) - 1];
    values
        .iter()
        .map(|&v| if v <= t1 { 1 } else if v <= t2 { 2 } else { 3 })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, LogNormal};

    #[test]
    fn ccdf_counts() {
        assert_eq!(ccdf(&[1.0, 2.0, 2.0, 4.0]), vec![(1.0, 1.0), (2.0, 0.75), (4.0, 0.25)]);
        assert_eq!(ccdf(&[7.0; 5]), vec![(7.0, 1.0)]);
    }

    #[test]
    fn ccdf_tail_slope_of_pareto() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f64> = (0..50_000)
            .map(|_| (1.0 - rand::Rng::random::<f64>(&mut rng)).powf(-1.0 / 1.5))
            .collect();
        let pts: Vec<(f64, f64)> = ccdf(&x)
            .into_iter()
            .filter(|&(v, p)| v >= 2.0 && p > 1e-3)
            .map(|(v, p)| (v.ln(), p.ln()))
            .collect();
        let k = pts.len() as f64;
        let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / k, pts.iter().map(|p| p.1).sum::<f64>() / k);
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let slope = sxy / sxx;
        assert!((slope + 1.5).abs() < 0.1, "slope {slope}");
    }

    #[test]
    fn tertile_rules() {
        let v: Vec<f64> = (1..=9).map(f64::from).collect();
        assert_eq!(tertiles(&v), vec![1, 1, 1, 2, 2, 2, 3, 3, 3]);
        assert_eq!(tertiles(&[4.0; 7]), vec![1; 7]);
    }

    #[test]
    fn tertiles_balanced_on_lognormal() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let d = LogNormal::new(3.0, 2.0).unwrap();
        for n in [300, 301, 302, 1000] {
            let v: Vec<f64> = (0..n).map(|_| d.sample(&mut rng)).collect();
            let t = tertiles(&v);
            for c in 1..=3u8 {
                let count = t.iter().filter(|&&x| x == c).count() as f64;
                assert!((count - n as f64 / 3.0).abs() <= 1.0, "n={n} c={c} count={count}");
            }
        }
    }
}
