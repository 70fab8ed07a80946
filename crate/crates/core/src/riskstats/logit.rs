//! Ordered-response model with split-specific slopes, fitted as two binary
//! logistic regressions on `[r ≤ L]` and `[r ≤ M]`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rating::Risk;

/// Coefficients are clamped to this magnitude when the data are separable.
pub const COEF_CAP: f64 = 20.0;
const GRAD_TOL: f64 = 1e-6;
const MAX_ITER: usize = 500;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryLogit {
    pub intercept: f64,
    pub coef: Vec<f64>,
    /// Standard errors of `[intercept, coef...]`; NaN when the information
    /// matrix is singular.
    pub std_err: Vec<f64>,
    pub iterations: usize,
    pub grad_norm: f64,
    pub separated: bool,
}

impl BinaryLogit {
    pub fn linear(&self, x: &[f64]) -> f64 {
        self.intercept + self.coef.iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
    }

    pub fn prob(&self, x: &[f64]) -> f64 {
        sigmoid(self.linear(x))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CumulativeLogitModel {
    pub a_l: f64,
    pub a_m: f64,
    pub b_l: Vec<f64>,
    pub b_m: Vec<f64>,
    pub split_l: BinaryLogit,
    pub split_m: BinaryLogit,
    /// Training rows where the fitted `P(r ≤ L)` exceeds `P(r ≤ M)`.
    pub ordering_violations: usize,
    pub separated: bool,
}

impl CumulativeLogitModel {
    /// `(P(L), P(M), P(H))` at `x`. Ordering violations give a zero `P(M)`.
    pub fn probabilities(&self, x: &[f64]) -> [f64; 3] {
        let le_l = self.split_l.prob(x);
        let le_m = self.split_m.prob(x).max(le_l);
        [le_l, le_m - le_l, 1.0 - le_m]
    }
}

pub(crate) fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

/// Mean negative log-likelihood of a binary logistic model and its gradient.
/// `beta[0]` is the intercept.
pub fn logistic_objective(x: &[Vec<f64>], z: &[bool], beta: &[f64]) -> (f64, Vec<f64>) {
    let n = x.len() as f64;
    let mut f = 0.0;
    let mut g = vec![0.0; beta.len()];
    for (row, &zi) in x.iter().zip(z) {
        let eta = beta[0] + beta[1..].iter().zip(row).map(|(b, v)| b * v).sum::<f64>();
        f += softplus(eta) - if zi { eta } else { 0.0 };
        let r = sigmoid(eta) - if zi { 1.0 } else { 0.0 };
        g[0] += r;
        for (gj, v) in g[1..].iter_mut().zip(row) {
            *gj += r * v;
        }
    }
    g.iter_mut().for_each(|v| *v /= n);
    (f / n, g)
}

fn hessian(x: &[Vec<f64>], beta: &[f64]) -> DMatrix<f64> {
    let d = beta.len();
    let mut h = DMatrix::<f64>::zeros(d, d);
    let mut row1 = vec![1.0; d];
    for row in x {
        row1[1..].copy_from_slice(row);
        let eta: f64 = beta.iter().zip(&row1).map(|(b, v)| b * v).sum();
        let p = sigmoid(eta);
        let w = p * (1.0 - p);
        for i in 0..d {
            for j in 0..=i {
                h[(i, j)] += w * row1[i] * row1[j];
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            h[(j, i)] = h[(i, j)];
        }
    }
    h
}

fn solve(h: &DMatrix<f64>, g: &[f64]) -> Option<DVector<f64>> {
    let rhs = DVector::from_column_slice(g);
    let scale = h.diagonal().amax().max(1e-300);
    let mut ridge = 0.0;
    for _ in 0..8 {
        let mut hr = h.clone();
        for i in 0..hr.nrows() {
            hr[(i, i)] += ridge;
        }
        if let Some(ch) = hr.cholesky() {
            return Some(ch.solve(&rhs));
        }
        ridge = if ridge == 0.0 { 1e-10 * scale } else { ridge * 100.0 };
    }
    None
}

/// Newton–Raphson with step halving on the mean negative log-likelihood.
pub fn fit_logistic(x: &[Vec<f64>], z: &[bool]) -> Result<BinaryLogit> {
    if x.is_empty() || x.len() != z.len() {
        return Err(Error::invalid(format!("{} rows for {} responses", x.len(), z.len())));
    }
    let p = x[0].len();
    if x.iter().any(|r| r.len() != p || r.iter().any(|v| !v.is_finite())) {
        return Err(Error::invalid("predictor rows must be finite and of equal length"));
    }
    let n = x.len() as f64;
    let mut beta = vec![0.0; p + 1];
    let share = z.iter().filter(|&&v| v).count() as f64 / n;
    beta[0] = if share > 0.0 && share < 1.0 { (share / (1.0 - share)).ln() } else { 0.0 };
    let (mut f, mut g) = logistic_objective(x, z, &beta);
    let mut separated = false;
    let mut iterations = 0;
    while iterations < MAX_ITER && norm(&g) >= GRAD_TOL {
        iterations += 1;
        let h = hessian(x, &beta) / n;
        let step = solve(&h, &g).unwrap_or_else(|| DVector::from_column_slice(&g));
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let cand: Vec<f64> =
                beta.iter().zip(step.iter()).map(|(b, s)| (b - t * s).clamp(-COEF_CAP, COEF_CAP)).collect();
            let (fc, gc) = logistic_objective(x, z, &cand);
            if fc <= f {
                let hit_cap = cand.iter().any(|b| b.abs() >= COEF_CAP);
                let progress = f - fc;
                beta = cand;
                f = fc;
                g = gc;
                accepted = true;
                if hit_cap {
                    separated = true;
                }
                if hit_cap && progress < 1e-14 {
                    accepted = false;
                }
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let info = hessian(x, &beta);
    let std_err = match info.clone().try_inverse() {
        Some(inv) => (0..=p).map(|i| inv[(i, i)].max(0.0).sqrt()).collect(),
        None => vec![f64::NAN; p + 1],
    };
    Ok(BinaryLogit { intercept: beta[0], coef: beta[1..].to_vec(), std_err, iterations, grad_norm: norm(&g), separated })
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Fits `log(P(r≤c)/P(r>c)) = a_c + b_c·x` for `c ∈ {L, M}`.
pub fn fit_cumulative_logit(x: &[Vec<f64>], y: &[Risk]) -> Result<CumulativeLogitModel> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!("{} rows for {} ratings", x.len(), y.len())));
    }
    let mut present = [false; 3];
    y.iter().for_each(|r| present[r.index()] = true);
    if present.iter().filter(|&&v| v).count() < 2 {
        return Err(Error::invalid("cumulative logit needs at least two distinct ratings"));
    }
    let z_l: Vec<bool> = y.iter().map(|&r| r <= Risk::L).collect();
    let z_m: Vec<bool> = y.iter().map(|&r| r <= Risk::M).collect();
    let split_l = fit_logistic(x, &z_l)?;
    let split_m = fit_logistic(x, &z_m)?;
    let ordering_violations = x.iter().filter(|row| split_l.linear(row) > split_m.linear(row) + 1e-12).count();
    Ok(CumulativeLogitModel {
        a_l: split_l.intercept,
        a_m: split_m.intercept,
        b_l: split_l.coef.clone(),
        b_m: split_m.coef.clone(),
        separated: split_l.separated || split_m.separated,
        split_l,
        split_m,
        ordering_violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn sample(n: usize, a: (f64, f64), b: (f64, f64), seed: u64) -> (Vec<Vec<f64>>, Vec<Risk>) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut x = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for _ in 0..n {
            let k = rng.random_range(0.0..12.0);
            let pl = sigmoid(a.0 + b.0 * k);
            let pm = sigmoid(a.1 + b.1 * k);
            let u: f64 = rng.random();
            y.push(if u < pl { Risk::L } else if u < pm { Risk::M } else { Risk::H });
            x.push(vec![k]);
        }
        (x, y)
    }

    #[test]
    fn recovers_planted_slopes() {
        let (x, y) = sample(20_000, (-1.0, 1.0), (0.25, 0.35), 1);
        let m = fit_cumulative_logit(&x, &y).unwrap();
        assert!((m.b_l[0] - 0.25).abs() < 0.05 && (m.b_m[0] - 0.35).abs() < 0.08, "{m:?}");
        assert!(m.split_l.grad_norm < 1e-6 && m.split_m.grad_norm < 1e-6);
        assert_eq!(m.ordering_violations, 0);
        let p = m.probabilities(&[3.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn null_slope_interval_covers_zero() {
        let (x, y) = sample(5_000, (-0.5, 0.7), (0.0, 0.0), 2);
        let m = fit_cumulative_logit(&x, &y).unwrap();
        for s in [&m.split_l, &m.split_m] {
            assert!(s.coef[0].abs() < 2.58 * s.std_err[1], "{s:?}");
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (x, y) = sample(300, (-1.0, 1.0), (0.25, 0.35), 3);
        let z: Vec<bool> = y.iter().map(|&r| r == Risk::L).collect();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let beta = vec![rng.random_range(-2.0..2.0), rng.random_range(-0.5..0.5)];
            let (_, g) = logistic_objective(&x, &z, &beta);
            for j in 0..2 {
                let h = 1e-5;
                let (mut up, mut dn) = (beta.clone(), beta.clone());
                up[j] += h;
                dn[j] -= h;
                let fd = (logistic_objective(&x, &z, &up).0 - logistic_objective(&x, &z, &dn).0) / (2.0 * h);
                assert!((fd - g[j]).abs() <= 1e-4 * g[j].abs().max(1e-3), "{fd} vs {}", g[j]);
            }
        }
    }

    #[test]
    fn separation_is_capped_and_flagged() {
        let x: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64]).collect();
        let y: Vec<Risk> = (0..40).map(|i| if i < 20 { Risk::H } else { Risk::L }).collect();
        let m = fit_cumulative_logit(&x, &y).unwrap();
        assert!(m.separated);
        assert!(m.b_l[0].abs() <= COEF_CAP && m.a_l.abs() <= COEF_CAP);
    }

    #[test]
    fn two_predictors_and_single_class_error() {
        let (x, y) = sample(2_000, (-1.0, 1.0), (0.25, 0.35), 5);
        let x2: Vec<Vec<f64>> = x.iter().enumerate().map(|(i, r)| vec![r[0], (i % 3) as f64 + 1.0]).collect();
        let m = fit_cumulative_logit(&x2, &y).unwrap();
        assert_eq!(m.b_l.len(), 2);
        assert!(fit_cumulative_logit(&x, &vec![Risk::M; x.len()]).is_err());
    }
}
