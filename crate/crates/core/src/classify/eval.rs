//! Confusion matrices, penalty-weighted scores and random baselines.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::twostep::{combine, PipelineOutput, TiePolicy};
use crate::error::{Error, Result};
use crate::rating::Risk;

/// Counts with rows = true class, columns = predicted class, both `L, M, H`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; 3]; 3],
}

impl ConfusionMatrix {
    pub fn from_predictions(truth: &[Risk], predicted: &[Risk]) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::invalid("truth and predictions differ in length"));
        }
        let mut c = ConfusionMatrix::default();
        for (t, p) in truth.iter().zip(predicted) {
            c.counts[t.index()][p.index()] += 1;
        }
        Ok(c)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    fn as_f64(&self) -> [[f64; 3]; 3] {
        self.counts.map(|row| row.map(|c| c as f64))
    }
}

/// Penalty matrices indexed `[true][predicted]` over `L, M, H`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyMatrices {
    pub acc: [[f64; 3]; 3],
    pub rec: [[f64; 3]; 3],
    pub pr: [[f64; 3]; 3],
}

impl Default for PenaltyMatrices {
    /// Understating risk and skipping a class cost more than the reverse.
    fn default() -> Self {
        let rec = [[1.0, -0.25, -0.75], [-0.75, 1.0, -0.25], [-1.0, -0.75, 1.75]];
        PenaltyMatrices { acc: [[1.0, -0.25, -0.5], [-0.75, 1.0, -0.25], [-1.0, -0.75, 1.0]], rec, pr: rec }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub accuracy: f64,
    pub recall_l: f64,
    pub recall_m: f64,
    pub recall_h: f64,
    pub ws_acc: f64,
    pub ws_rec: f64,
    pub ws_pr: f64,
}

impl Scores {
    pub fn recall(&self, r: Risk) -> f64 {
        match r {
            Risk::L => self.recall_l,
            Risk::M => self.recall_m,
            Risk::H => self.recall_h,
        }
    }
}

/// Scores of a (possibly fractional) confusion matrix. Rows without mass
/// are skipped in the recall terms; zero columns add nothing to `ws_pr`.
fn scores(c: &[[f64; 3]; 3], p: &PenaltyMatrices) -> Scores {
    let total: f64 = c.iter().flatten().sum();
    let row: Vec<f64> = (0..3).map(|x| c[x].iter().sum()).collect();
    let col: Vec<f64> = (0..3).map(|y| (0..3).map(|x| c[x][y]).sum()).collect();
    let recall = |x: usize| if row[x] > 0.0 { c[x][x] / row[x] } else { 0.0 };
    let (mut ws_acc, mut ws_rec, mut ws_pr) = (0.0, 0.0, 0.0);
    for x in 0..3 {
        for y in 0..3 {
            ws_acc += c[x][y] * p.acc[x][y];
            if row[x] > 0.0 {
                ws_rec += c[x][y] / row[x] * p.rec[x][y];
            }
            if col[y] > 0.0 {
                ws_pr += c[x][y] / col[y] * p.pr[x][y];
            }
        }
    }
    Scores {
        accuracy: (0..3).map(|x| c[x][x]).sum::<f64>() / total,
        recall_l: recall(0),
        recall_m: recall(1),
        recall_h: recall(2),
        ws_acc: ws_acc / total,
        ws_rec,
        ws_pr,
    }
}

/// Accuracy, per-class recall and the three weighted scores. Every true
/// class needs at least one sample.
pub fn evaluate(c: &ConfusionMatrix, p: &PenaltyMatrices) -> Result<Scores> {
    for (x, row) in c.counts.iter().enumerate() {
        if row.iter().sum::<u64>() == 0 {
            return Err(Error::invalid(format!("no test samples of class {}", Risk::ALL[x])));
        }
    }
    Ok(scores(&c.as_f64(), p))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    OneStep,
    TwoStep,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    pub scheme: Scheme,
    pub prevalence: [f64; 3],
    /// Probability of predicting `L, M, H`.
    pub prediction: [f64; 3],
    /// Expected scores; recalls equal `prediction`.
    pub scores: Scores,
}

/// Outcomes of a random pipeline for class `c`: `c` from step 1 with
/// probability `q_c`, otherwise one of the merged pair drawn by prevalence.
fn random_pipeline(q: &[f64; 3], c: usize) -> Vec<(PipelineOutput, f64)> {
    let mut out = vec![(PipelineOutput { label: Risk::ALL[c], from_step1: true }, q[c])];
    for a in (0..3).filter(|&a| a != c) {
        // P(X) · q_a / (1 − q_c) = q_a
        out.push((PipelineOutput { label: Risk::ALL[a], from_step1: false }, q[a]));
    }
    out
}

/// Expected scores of a classifier that ignores the features. One-step
/// draws class `c` with probability `q_c`; two-step draws through each
/// pipeline as above and combines the three labels like a trained model.
pub fn random_baseline(q: [f64; 3], scheme: Scheme, tie: TiePolicy, penalties: &PenaltyMatrices) -> Result<Baseline> {
    if q.iter().any(|&x| !(x >= 0.0)) || (q.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("class distribution {q:?} must be non-negative and sum to 1")));
    }
    let prediction = match scheme {
        Scheme::OneStep => q,
        Scheme::TwoStep => {
            let mut pi = [0.0; 3];
            let (a, b, c) = (random_pipeline(&q, 0), random_pipeline(&q, 1), random_pipeline(&q, 2));
            for &(oa, pa) in &a {
                for &(ob, pb) in &b {
                    for &(oc, pc) in &c {
                        pi[combine(&[oa, ob, oc], tie).index()] += pa * pb * pc;
                    }
                }
            }
            pi
        }
    };
    let expected: [[f64; 3]; 3] = std::array::from_fn(|x| std::array::from_fn(|y| q[x] * prediction[y]));
    let mut s = scores(&expected, penalties);
    // recall of an absent class is still the chance of predicting it
    s.recall_l = prediction[0];
    s.recall_m = prediction[1];
    s.recall_h = prediction[2];
    Ok(Baseline { scheme, prevalence: q, prediction, scores: s })
}

/// Monte-Carlo estimate of the two-step random prediction distribution.
pub fn simulate_two_step_baseline(q: [f64; 3], tie: TiePolicy, draws: usize, seed: u64) -> [f64; 3] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = [0usize; 3];
    for _ in 0..draws {
        let outs: [PipelineOutput; 3] = std::array::from_fn(|c| {
            if rng.random::<f64>() < q[c] {
                PipelineOutput { label: Risk::ALL[c], from_step1: true }
            } else {
                let pair: Vec<usize> = (0..3).filter(|&a| a != c).collect();
                let rest = q[pair[0]] + q[pair[1]];
                let pick = if rest > 0.0 && rng.random::<f64>() * rest < q[pair[0]] { pair[0] } else { pair[1] };
                PipelineOutput { label: Risk::ALL[pick], from_step1: false }
            }
        });
        counts[combine(&outs, tie).index()] += 1;
    }
    counts.map(|c| c as f64 / draws as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_confusion() {
        let c = ConfusionMatrix { counts: [[10, 0, 0], [0, 7, 0], [0, 0, 3]] };
        let s = evaluate(&c, &PenaltyMatrices::default()).unwrap();
        assert_eq!(s.accuracy, 1.0);
        assert_eq!(s.ws_acc, 1.0);
        assert_eq!(s.ws_rec, 3.75);
        assert_eq!(s.ws_pr, 3.75);
    }

    #[test]
    fn high_risk_called_low() {
        let p = PenaltyMatrices::default();
        let base = ConfusionMatrix { counts: [[5, 0, 0], [0, 5, 0], [0, 0, 5]] };
        let mut worse = base;
        worse.counts[2] = [5, 0, 0];
        let total = base.total() as f64;
        let drop = evaluate(&base, &p).unwrap().ws_acc * total - evaluate(&worse, &p).unwrap().ws_acc * total;
        // each moved sample loses its +1 and gains −1
        assert!((drop - 5.0 * 2.0).abs() < 1e-12);
        assert_eq!(p.acc[2][0], -1.0);
        let s = evaluate(&worse, &p).unwrap();
        assert_eq!(s.recall_h, 0.0);
        assert!(s.ws_acc < 1.0);
    }

    #[test]
    fn empty_row_is_an_error() {
        let c = ConfusionMatrix { counts: [[1, 0, 0], [0, 1, 0], [0, 0, 0]] };
        assert!(evaluate(&c, &PenaltyMatrices::default()).is_err());
    }

    #[test]
    fn one_step_baseline() {
        let p = PenaltyMatrices::default();
        let b = random_baseline([0.435, 0.475, 0.090], Scheme::OneStep, TiePolicy::default(), &p).unwrap();
        assert!((b.scores.accuracy - 0.423).abs() < 5e-4, "{}", b.scores.accuracy);
        assert!((b.scores.recall_h - 0.09).abs() < 1e-12);
        let d = random_baseline([1.0, 0.0, 0.0], Scheme::OneStep, TiePolicy::default(), &p).unwrap();
        assert_eq!(d.scores.accuracy, 1.0);
        assert!(random_baseline([0.5, 0.6, 0.0], Scheme::OneStep, TiePolicy::default(), &p).is_err());
    }

    #[test]
    fn two_step_baseline_matches_simulation() {
        let p = PenaltyMatrices::default();
        for tie in [TiePolicy::StepOneWins, TiePolicy::Median] {
            for q in [[0.435, 0.475, 0.090], [0.45, 0.45, 0.10], [0.2, 0.3, 0.5]] {
                let b = random_baseline(q, Scheme::TwoStep, tie, &p).unwrap();
                assert!((b.prediction.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                let sim = simulate_two_step_baseline(q, tie, 100_000, 7);
                for c in 0..3 {
                    assert!((sim[c] - b.prediction[c]).abs() < 0.01, "{q:?} {sim:?} {:?}", b.prediction);
                }
                let acc: f64 = (0..3).map(|c| q[c] * b.prediction[c]).sum();
                assert!((b.scores.accuracy - acc).abs() < 1e-12);
            }
        }
    }
}
