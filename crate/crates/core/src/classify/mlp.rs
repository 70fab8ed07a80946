//! Feed-forward network with logistic hidden units and a softmax output.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::softmax::softmax_in_place;
use super::{check_data, require_classes};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpOptions {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for MlpOptions {
    fn default() -> Self {
        MlpOptions { hidden: vec![50], epochs: 30, learning_rate: 0.01, batch_size: 64, seed: 0 }
    }
}

/// Dense layer, weights row-major `n_out × n_in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub n_in: usize,
    pub n_out: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    /// Hidden layers followed by the output layer.
    pub layers: Vec<Layer>,
    pub n_classes: usize,
    /// Mean training loss after each epoch.
    pub loss_history: Vec<f64>,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl MlpModel {
    /// Glorot-uniform weights, zero biases.
    pub fn init(n_in: usize, hidden: &[usize], n_classes: usize, seed: u64) -> Result<Self> {
        if hidden.contains(&0) || n_in == 0 || n_classes < 2 {
            return Err(Error::invalid("layer sizes must be ≥ 1 and at least two classes"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sizes = vec![n_in];
        sizes.extend_from_slice(hidden);
        sizes.push(n_classes);
        let layers = sizes
            .windows(2)
            .map(|w| {
                let (n_in, n_out) = (w[0], w[1]);
                let limit = (6.0 / (n_in + n_out) as f64).sqrt();
                Layer {
                    n_in,
                    n_out,
                    weights: (0..n_in * n_out).map(|_| rng.random_range(-limit..limit)).collect(),
                    bias: vec![0.0; n_out],
                }
            })
            .collect();
        Ok(MlpModel { layers, n_classes, loss_history: Vec::new() })
    }

    /// Activations of every layer, input first; the last is the softmax.
    fn forward(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = vec![x.to_vec()];
        let last = self.layers.len() - 1;
        for (li, layer) in self.layers.iter().enumerate() {
            let input = &acts[li];
            let mut z: Vec<f64> = (0..layer.n_out)
                .map(|o| layer.bias[o] + layer.weights[o * layer.n_in..(o + 1) * layer.n_in].iter().zip(input).map(|(w, a)| w * a).sum::<f64>())
                .collect();
            if li == last {
                softmax_in_place(&mut z);
            } else {
                z.iter_mut().for_each(|v| *v = sigmoid(*v));
            }
            acts.push(z);
        }
        acts
    }

    pub fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        self.forward(x).pop().expect("output layer")
    }

    /// Hidden-layer activations for `x`.
    pub fn hidden_activations(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = self.forward(x);
        acts.pop();
        acts.remove(0);
        acts
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// All parameters, layer by layer, weights before biases.
    pub fn params(&self) -> Vec<f64> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(&l.bias).copied()).collect()
    }

    pub fn set_params(&mut self, p: &[f64]) {
        let mut off = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&p[off..off + nw]);
            off += nw;
            let nb = l.bias.len();
            l.bias.copy_from_slice(&p[off..off + nb]);
            off += nb;
        }
    }

    /// Mean cross-entropy over the batch and its gradient in [`Self::params`] order.
    pub fn loss_and_gradient(&self, x: &[Vec<f64>], y: &[usize]) -> (f64, Vec<f64>) {
        let all: Vec<usize> = (0..x.len()).collect();
        self.batch_gradient(x, y, &all)
    }

    fn batch_gradient(&self, x: &[Vec<f64>], y: &[usize], batch: &[usize]) -> (f64, Vec<f64>) {
        let mut grads: Vec<(Vec<f64>, Vec<f64>)> =
            self.layers.iter().map(|l| (vec![0.0; l.weights.len()], vec![0.0; l.bias.len()])).collect();
        let mut loss = 0.0;
        for &i in batch {
            let (row, label) = (&x[i], y[i]);
            let acts = self.forward(row);
            let out = acts.last().expect("output");
            loss -= out[label].max(f64::MIN_POSITIVE).ln();
            // delta at the output pre-activation
            let mut delta: Vec<f64> = out.iter().enumerate().map(|(c, p)| p - (c == label) as u8 as f64).collect();
            for li in (0..self.layers.len()).rev() {
                let layer = &self.layers[li];
                let input = &acts[li];
                let (gw, gb) = &mut grads[li];
                for o in 0..layer.n_out {
                    gb[o] += delta[o];
                    let row_g = &mut gw[o * layer.n_in..(o + 1) * layer.n_in];
                    row_g.iter_mut().zip(input).for_each(|(g, a)| *g += delta[o] * a);
                }
                if li > 0 {
                    delta = (0..layer.n_in)
                        .map(|i| {
                            let back: f64 = (0..layer.n_out).map(|o| layer.weights[o * layer.n_in + i] * delta[o]).sum();
                            back * input[i] * (1.0 - input[i])
                        })
                        .collect();
                }
            }
        }
        let n = batch.len().max(1) as f64;
        let grad = grads.into_iter().flat_map(|(w, b)| w.into_iter().chain(b)).map(|g| g / n).collect();
        (loss / n, grad)
    }
}

/// Mini-batch training with Adam updates; the shuffling order and the
/// initial weights come from `opts.seed`.
pub fn train_mlp(x: &[Vec<f64>], y: &[usize], k: usize, opts: &MlpOptions) -> Result<MlpModel> {
    let p = check_data(x, y, k)?;
    require_classes(y, 2)?;
    if opts.batch_size == 0 || !(opts.learning_rate > 0.0) {
        return Err(Error::invalid("batch size and learning rate must be positive"));
    }
    let mut model = MlpModel::init(p, &opts.hidden, k, opts.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(1));
    let mut params = model.params();
    let (b1, b2, eps): (f64, f64, f64) = (0.9, 0.999, 1e-8);
    let mut m = vec![0.0; params.len()];
    let mut v = vec![0.0; params.len()];
    let mut t = 0i32;
    let mut order: Vec<usize> = (0..x.len()).collect();
    for epoch in 0..opts.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(opts.batch_size) {
            let (loss, g) = model.batch_gradient(x, y, chunk);
            if !loss.is_finite() || g.iter().any(|v| !v.is_finite()) {
                return Err(Error::Divergence(format!(
                    "non-finite loss at epoch {epoch} with learning rate {}",
                    opts.learning_rate
                )));
            }
            epoch_loss += loss * chunk.len() as f64;
            t += 1;
            let (c1, c2) = (1.0 - b1.powi(t), 1.0 - b2.powi(t));
            for j in 0..params.len() {
                m[j] = b1 * m[j] + (1.0 - b1) * g[j];
                v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
                params[j] -= opts.learning_rate * (m[j] / c1) / ((v[j] / c2).sqrt() + eps);
            }
            model.set_params(&params);
        }
        model.loss_history.push(epoch_loss / x.len() as f64);
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::argmax;

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let x: Vec<Vec<f64>> = (0..10).map(|_| (0..3).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect()).collect();
        let y: Vec<usize> = (0..10).map(|i| i % 3).collect();
        for point in 0..25 {
            let mut model = MlpModel::init(3, &[4, 3], 3, point).unwrap();
            let p: Vec<f64> = model.params().iter().map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            model.set_params(&p);
            let (_, g) = model.loss_and_gradient(&x, &y);
            let eps = 1e-5;
            let mut fd = vec![0.0; p.len()];
            for j in 0..p.len() {
                let mut a = p.clone();
                a[j] += eps;
                model.set_params(&a);
                let fa = model.loss_and_gradient(&x, &y).0;
                a[j] -= 2.0 * eps;
                model.set_params(&a);
                let fb = model.loss_and_gradient(&x, &y).0;
                fd[j] = (fa - fb) / (2.0 * eps);
            }
            let diff: f64 = g.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let scale: f64 = g.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-12);
            assert!(diff / scale < 1e-4, "{}", diff / scale);
        }
    }

    #[test]
    fn seeded_init_breaks_symmetry() {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 / 20.0, 1.0 - i as f64 / 20.0]).collect();
        let y: Vec<usize> = (0..20).map(|i| (i >= 10) as usize).collect();
        let m = train_mlp(&x, &y, 2, &MlpOptions { hidden: vec![5], epochs: 1, ..MlpOptions::default() }).unwrap();
        let h = &m.hidden_activations(&x[3])[0];
        for i in 0..h.len() {
            for j in i + 1..h.len() {
                assert!((h[i] - h[j]).abs() > 1e-9);
            }
        }
        let again = train_mlp(&x, &y, 2, &MlpOptions { hidden: vec![5], epochs: 1, ..MlpOptions::default() }).unwrap();
        assert_eq!(m, again);
    }

    fn circles(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let label = i % 2;
            let r = if label == 0 { 1.0 } else { 0.5 } + rng.random_range(-0.1..0.1);
            let t = rng.random::<f64>() * std::f64::consts::TAU;
            x.push(vec![r * t.cos(), r * t.sin()]);
            y.push(label);
        }
        (x, y)
    }

    #[test]
    fn concentric_circles() {
        let (x, y) = circles(1000, 1);
        let (tx, ty) = circles(500, 2);
        let m = train_mlp(&x, &y, 2, &MlpOptions { hidden: vec![50], epochs: 100, learning_rate: 0.01, batch_size: 32, seed: 3 }).unwrap();
        let acc = tx.iter().zip(&ty).filter(|(r, &l)| argmax(&m.predict_proba(r)) == l).count() as f64 / ty.len() as f64;
        assert!(acc > 0.9, "{acc}");
    }

    #[test]
    fn divergence_is_reported() {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, -(i as f64)]).collect();
        let y: Vec<usize> = (0..20).map(|i| i % 2).collect();
        let opts = MlpOptions { learning_rate: 1e308, epochs: 5, ..MlpOptions::default() };
        assert!(matches!(train_mlp(&x, &y, 2, &opts), Err(Error::Divergence(_))));
        assert!(MlpModel::init(2, &[0], 2, 0).is_err());
    }
}
