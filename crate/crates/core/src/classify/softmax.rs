//! Multinomial logistic regression.

use serde::{Deserialize, Serialize};

use super::{check_data, require_classes};
use super::optim::lbfgs;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftmaxOptions {
    /// L2 penalty on the weights (not the intercepts).
    pub l2: f64,
    pub max_iter: usize,
    /// Stop when the gradient norm falls below this.
    pub tol: f64,
}

impl Default for SoftmaxOptions {
    fn default() -> Self {
        SoftmaxOptions { l2: 1e-4, max_iter: 500, tol: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftmaxModel {
    /// One row of weights per class.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub iterations: usize,
    pub grad_norm: f64,
    pub converged: bool,
}

/// Writes softmax of `z` into `z`.
pub(crate) fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    z.iter_mut().for_each(|v| *v /= sum);
}

/// Mean cross-entropy plus `l2/2 ‖W‖²` and its gradient. Parameters are
/// laid out class by class as `[w_c1 … w_cp, b_c]`.
pub fn softmax_objective(x: &[Vec<f64>], y: &[usize], k: usize, params: &[f64], l2: f64) -> (f64, Vec<f64>) {
    let p = x.first().map_or(0, Vec::len);
    let stride = p + 1;
    let n = x.len() as f64;
    let mut grad = vec![0.0; params.len()];
    let mut loss = 0.0;
    let mut z = vec![0.0; k];
    for (row, &label) in x.iter().zip(y) {
        for c in 0..k {
            let w = &params[c * stride..c * stride + p];
            z[c] = params[c * stride + p] + w.iter().zip(row).map(|(a, b)| a * b).sum::<f64>();
        }
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        loss += lse - z[label];
        for c in 0..k {
            let d = (z[c] - lse).exp() - (c == label) as u8 as f64;
            let g = &mut grad[c * stride..(c + 1) * stride];
            g[..p].iter_mut().zip(row).for_each(|(gi, xi)| *gi += d * xi);
            g[p] += d;
        }
    }
    loss /= n;
    grad.iter_mut().for_each(|g| *g /= n);
    for c in 0..k {
        for j in 0..p {
            let w = params[c * stride + j];
            loss += 0.5 * l2 * w * w;
            grad[c * stride + j] += l2 * w;
        }
    }
    (loss, grad)
}

pub fn train_softmax(x: &[Vec<f64>], y: &[usize], k: usize, opts: &SoftmaxOptions) -> Result<SoftmaxModel> {
    let p = check_data(x, y, k)?;
    require_classes(y, 2)?;
    let stride = p + 1;
    let min = lbfgs(|params| softmax_objective(x, y, k, params, opts.l2), vec![0.0; k * stride], opts.max_iter, opts.tol);
    Ok(SoftmaxModel {
        weights: (0..k).map(|c| min.x[c * stride..c * stride + p].to_vec()).collect(),
        bias: (0..k).map(|c| min.x[c * stride + p]).collect(),
        iterations: min.iterations,
        grad_norm: min.grad_norm,
        converged: min.converged,
    })
}

impl SoftmaxModel {
    pub fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        let mut z: Vec<f64> = self
            .weights
            .iter()
            .zip(&self.bias)
            .map(|(w, b)| b + w.iter().zip(x).map(|(a, v)| a * v).sum::<f64>())
            .collect();
        softmax_in_place(&mut z);
        z
    }
}
