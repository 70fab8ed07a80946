//! One-step and class-specialized two-step classifiers.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{BaseKind, Hyper, Model};
use super::smote::{smote, DEFAULT_K};
use super::{check_data, require_classes};
use crate::error::Result;
use crate::rating::Risk;

/// How three pairwise-distinct pipeline labels are resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TiePolicy {
    /// The only label produced by a first step wins; otherwise the median.
    #[default]
    StepOneWins,
    /// Always the median, which is `M`.
    Median,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineOutput {
    pub label: Risk,
    pub from_step1: bool,
}

/// Median of the three labels under `L < M < H`.
pub fn combine(outputs: &[PipelineOutput; 3], tie: TiePolicy) -> Risk {
    let mut idx = outputs.map(|o| o.label.index());
    idx.sort_unstable();
    let distinct = idx[0] != idx[1] && idx[1] != idx[2];
    if distinct && tie == TiePolicy::StepOneWins {
        let firsts: Vec<Risk> = outputs.iter().filter(|o| o.from_step1).map(|o| o.label).collect();
        if let [only] = firsts[..] {
            return only;
        }
    }
    Risk::ALL[idx[1]]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneStepModel {
    pub base: BaseKind,
    pub hyper: Hyper,
    pub seed: u64,
    pub model: Model,
}

/// A plain three-class model on `L, M, H`.
pub fn train_one_step(x: &[Vec<f64>], y: &[usize], base: BaseKind, hyper: &Hyper, seed: u64) -> Result<OneStepModel> {
    check_data(x, y, 3)?;
    require_classes(y, 2)?;
    Ok(OneStepModel { base, hyper: hyper.clone(), seed, model: Model::train(base, hyper, x, y, 3, seed)? })
}

impl OneStepModel {
    pub fn predict(&self, x: &[f64]) -> Risk {
        Risk::ALL[self.model.predict(x)]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TwoStepHyper {
    pub step1: Hyper,
    pub step2: Hyper,
    pub smote_k: usize,
    pub tie: TiePolicy,
}

impl Default for TwoStepHyper {
    fn default() -> Self {
        TwoStepHyper { step1: Hyper::default(), step2: Hyper::default(), smote_k: DEFAULT_K, tie: TiePolicy::default() }
    }
}

impl TwoStepHyper {
    pub fn same(h: Hyper) -> Self {
        TwoStepHyper { step1: h.clone(), step2: h, ..TwoStepHyper::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pipeline {
    pub class: Risk,
    /// The other two classes, lower risk first.
    pub merged: [Risk; 2],
    /// Binary model: 0 = `class`, 1 = merged.
    pub step1: Model,
    /// Binary model over `merged`.
    pub step2: Model,
    /// Rows per step-1 label after rebalancing.
    pub step1_counts: [usize; 2],
    pub synthetic: usize,
}

impl Pipeline {
    pub fn predict(&self, x: &[f64]) -> PipelineOutput {
        if self.step1.predict(x) == 0 {
            PipelineOutput { label: self.class, from_step1: true }
        } else {
            PipelineOutput { label: self.merged[self.step2.predict(x)], from_step1: false }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoStepModel {
    pub base: BaseKind,
    pub hyper: TwoStepHyper,
    pub seed: u64,
    /// Pipelines for `L, M, H` in that order.
    pub pipelines: Vec<Pipeline>,
}

fn train_pipeline(
    x: &[Vec<f64>],
    y: &[usize],
    class: Risk,
    base: BaseKind,
    hyper: &TwoStepHyper,
    seed: u64,
) -> Result<Pipeline> {
    let c = class.index();
    let merged: Vec<Risk> = Risk::ALL.into_iter().filter(|&r| r != class).collect();
    let merged = [merged[0], merged[1]];
    let mut x1: Vec<Vec<f64>> = x.to_vec();
    let mut y1: Vec<usize> = y.iter().map(|&l| (l != c) as usize).collect();
    let mut synthetic = 0;
    if class == Risk::H {
        let minority: Vec<Vec<f64>> = x.iter().zip(y).filter(|(_, &l)| l == c).map(|(r, _)| r.clone()).collect();
        let others = y.len() - minority.len();
        let n_new = others.saturating_sub(minority.len());
        let extra = smote(&minority, hyper.smote_k, n_new, seed ^ 0x5307e)?;
        synthetic = extra.samples.len();
        y1.extend(std::iter::repeat_n(0, synthetic));
        x1.extend(extra.samples);
    }
    let step1_counts = [y1.iter().filter(|&&l| l == 0).count(), y1.iter().filter(|&&l| l == 1).count()];
    let step1 = Model::train(base, &hyper.step1, &x1, &y1, 2, seed)?;
    let (x2, y2): (Vec<Vec<f64>>, Vec<usize>) = x
        .iter()
        .zip(y)
        .filter(|(_, &l)| l != c)
        .map(|(r, &l)| (r.clone(), (l == merged[1].index()) as usize))
        .unzip();
    let step2 = Model::train(base, &hyper.step2, &x2, &y2, 2, seed.wrapping_add(1))?;
    Ok(Pipeline { class, merged, step1, step2, step1_counts, synthetic })
}

/// Trains the three pipelines (in parallel). Every class must occur in `y`.
pub fn train_two_step(x: &[Vec<f64>], y: &[usize], base: BaseKind, hyper: &TwoStepHyper, seed: u64) -> Result<TwoStepModel> {
    check_data(x, y, 3)?;
    require_classes(y, 3)?;
    let pipelines = Risk::ALL
        .par_iter()
        .map(|&r| train_pipeline(x, y, r, base, hyper, seed.wrapping_mul(31).wrapping_add(r.index() as u64 * 1000)))
        .collect::<Result<Vec<_>>>()?;
    Ok(TwoStepModel { base, hyper: hyper.clone(), seed, pipelines })
}

impl TwoStepModel {
    pub fn outputs(&self, x: &[f64]) -> [PipelineOutput; 3] {
        std::array::from_fn(|i| self.pipelines[i].predict(x))
    }

    pub fn predict(&self, x: &[f64]) -> Risk {
        combine(&self.outputs(x), self.hyper.tie)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn out(label: Risk, from_step1: bool) -> PipelineOutput {
        PipelineOutput { label, from_step1 }
    }

    #[test]
    fn median_rule() {
        let t = TiePolicy::StepOneWins;
        assert_eq!(combine(&[out(Risk::L, true), out(Risk::L, false), out(Risk::M, false)], t), Risk::L);
        assert_eq!(combine(&[out(Risk::H, false), out(Risk::H, true), out(Risk::H, true)], t), Risk::H);
        // M from the M pipeline's first step
        assert_eq!(combine(&[out(Risk::L, false), out(Risk::M, true), out(Risk::H, false)], t), Risk::M);
        assert_eq!(combine(&[out(Risk::M, false), out(Risk::L, false), out(Risk::H, true)], t), Risk::H);
        assert_eq!(combine(&[out(Risk::M, false), out(Risk::L, false), out(Risk::H, true)], TiePolicy::Median), Risk::M);
        // two first-step labels, or none, fall back to M
        assert_eq!(combine(&[out(Risk::L, true), out(Risk::H, false), out(Risk::M, true)], t), Risk::M);
        assert_eq!(combine(&[out(Risk::M, false), out(Risk::H, false), out(Risk::L, false)], t), Risk::M);
    }

    fn toy(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let label = if i % 10 == 0 { 2 } else { i % 2 };
            let centre = [0.0, 1.0, 2.0][label];
            x.push(vec![centre + rng.random::<f64>() * 0.8, rng.random::<f64>()]);
            y.push(label);
        }
        (x, y)
    }

    #[test]
    fn pipeline_contracts() {
        let (x, y) = toy(300, 1);
        let m = train_two_step(&x, &y, BaseKind::Tree, &TwoStepHyper::same(Hyper::tree(3)), 4).unwrap();
        let l = &m.pipelines[0];
        assert_eq!(l.merged, [Risk::M, Risk::H]);
        assert_eq!(l.step1_counts, [y.iter().filter(|&&c| c == 0).count(), y.iter().filter(|&&c| c != 0).count()]);
        assert_eq!(l.synthetic, 0);
        let h = &m.pipelines[2];
        let n_h = y.iter().filter(|&&c| c == 2).count();
        assert!(h.step1_counts[0] >= n_h);
        assert_eq!(h.step1_counts[0], h.step1_counts[1]);
        assert_eq!(h.synthetic, h.step1_counts[0] - n_h);
        let again = train_two_step(&x, &y, BaseKind::Tree, &TwoStepHyper::same(Hyper::tree(3)), 4).unwrap();
        assert_eq!(m, again);
        let acc = x.iter().zip(&y).filter(|(r, &c)| m.predict(r).index() == c).count() as f64 / 300.0;
        assert!(acc > 0.8, "{acc}");
    }

    #[test]
    fn missing_class_is_an_error() {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64]).collect();
        let y: Vec<usize> = (0..20).map(|i| i % 2).collect();
        assert!(train_two_step(&x, &y, BaseKind::Softmax, &TwoStepHyper::default(), 0).is_err());
    }

    #[test]
    fn every_learner_round_trips_json() {
        let (x, y) = toy(200, 2);
        for base in BaseKind::ALL {
            let hyper = TwoStepHyper::same(Hyper { epochs: 2, hidden: vec![4], ..Hyper::tree(3) });
            let m = train_two_step(&x, &y, base, &hyper, 9).unwrap();
            let back: TwoStepModel = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
            for r in &x {
                assert_eq!(back.predict(r), m.predict(r));
            }
            let one = train_one_step(&x, &y, base, &hyper.step1, 9).unwrap();
            let back: OneStepModel = serde_json::from_str(&serde_json::to_string(&one).unwrap()).unwrap();
            assert_eq!(back.predict(&x[0]), one.predict(&x[0]));
        }
    }
}
