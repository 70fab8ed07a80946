//! Seeded splits and hyper-parameter grid search.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::eval::{evaluate, ConfusionMatrix, PenaltyMatrices, Scores, Scheme};
use super::model::{BaseKind, Hyper};
use super::twostep::{train_one_step, train_two_step, TwoStepHyper};
use crate::error::{Error, Result};
use crate::rating::Risk;

/// Splits row indices per class so each class keeps a `train_frac` share
/// in the training part. Both parts come back sorted.
pub fn stratified_split(y: &[usize], train_frac: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = y.iter().max().map_or(0, |&m| m + 1);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for c in 0..k {
        let mut rows: Vec<usize> = (0..y.len()).filter(|&i| y[i] == c).collect();
        rows.shuffle(&mut rng);
        let cut = (rows.len() as f64 * train_frac).round() as usize;
        train.extend_from_slice(&rows[..cut]);
        test.extend_from_slice(&rows[cut..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    Accuracy,
    RecallH,
    WsAcc,
    WsRec,
    WsPr,
}

impl Objective {
    pub fn of(self, s: &Scores) -> f64 {
        match self {
            Objective::Accuracy => s.accuracy,
            Objective::RecallH => s.recall_h,
            Objective::WsAcc => s.ws_acc,
            Objective::WsRec => s.ws_rec,
            Objective::WsPr => s.ws_pr,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub hyper: TwoStepHyper,
    pub confusion: ConfusionMatrix,
    pub scores: Scores,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub base: BaseKind,
    pub scheme: Scheme,
    pub objective: Objective,
    /// Index of the best row; the earliest wins ties.
    pub best: usize,
    pub rows: Vec<GridRow>,
}

impl GridResult {
    pub fn best_hyper(&self) -> &TwoStepHyper {
        &self.rows[self.best].hyper
    }
}

/// Tree depths `3..=10`, the same depth for both steps.
pub fn depth_grid() -> Vec<TwoStepHyper> {
    (3..=10).map(|d| TwoStepHyper::same(Hyper::tree(d))).collect()
}

/// Trains every grid point on `train` and scores it on `validate`. For
/// one-step runs only `step1` of each point is used.
#[allow(clippy::too_many_arguments)]
pub fn grid_search(
    train: (&[Vec<f64>], &[usize]),
    validate: (&[Vec<f64>], &[usize]),
    base: BaseKind,
    scheme: Scheme,
    grid: &[TwoStepHyper],
    objective: Objective,
    penalties: &PenaltyMatrices,
    seed: u64,
) -> Result<GridResult> {
    if grid.is_empty() {
        return Err(Error::invalid("empty hyper-parameter grid"));
    }
    let truth: Vec<Risk> = validate.1.iter().map(|&c| Risk::ALL[c]).collect();
    let rows = grid
        .par_iter()
        .map(|h| {
            let predicted: Vec<Risk> = match scheme {
                Scheme::OneStep => {
                    let m = train_one_step(train.0, train.1, base, &h.step1, seed)?;
                    validate.0.iter().map(|r| m.predict(r)).collect()
                }
                Scheme::TwoStep => {
                    let m = train_two_step(train.0, train.1, base, h, seed)?;
                    validate.0.iter().map(|r| m.predict(r)).collect()
                }
            };
            let confusion = ConfusionMatrix::from_predictions(&truth, &predicted)?;
            let scores = evaluate(&confusion, penalties)?;
            Ok(GridRow { hyper: h.clone(), confusion, objective: objective.of(&scores), scores })
        })
        .collect::<Result<Vec<_>>>()?;
    let best = (0..rows.len()).fold(0, |b, i| if rows[i].objective > rows[b].objective { i } else { b });
    Ok(GridResult { base, scheme, objective, best, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn data(n: usize, seed: u64, h_share: f64) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for _ in 0..n {
            let u: f64 = rng.random();
            let label = if u < h_share { 2 } else if u < (1.0 + h_share) / 2.0 { 1 } else { 0 };
            let a = label as f64 + rng.random::<f64>() * 1.8;
            x.push(vec![a, rng.random(), (a * 3.0).sin()]);
            y.push(label);
        }
        (x, y)
    }

    #[test]
    fn split_is_stratified_and_seeded() {
        let y: Vec<usize> = (0..400).map(|i| (i % 4 == 0) as usize).collect();
        let (tr, te) = stratified_split(&y, 0.75, 3);
        assert_eq!(tr.len() + te.len(), 400);
        assert_eq!(tr.iter().filter(|&&i| y[i] == 1).count(), 75);
        assert_eq!((tr.clone(), te.clone()), stratified_split(&y, 0.75, 3));
        assert_ne!(tr, stratified_split(&y, 0.75, 4).0);
    }

    #[test]
    fn depth_grid_table() {
        let (x, y) = data(600, 1, 0.2);
        let (tr, va) = stratified_split(&y, 0.75, 2);
        let pick = |idx: &[usize]| -> (Vec<Vec<f64>>, Vec<usize>) { (idx.iter().map(|&i| x[i].clone()).collect(), idx.iter().map(|&i| y[i]).collect()) };
        let (trx, try_) = pick(&tr);
        let (vax, vay) = pick(&va);
        let p = PenaltyMatrices::default();
        let r = grid_search((&trx, &try_), (&vax, &vay), BaseKind::Tree, Scheme::OneStep, &depth_grid(), Objective::Accuracy, &p, 0).unwrap();
        assert_eq!(r.rows.len(), 8);
        let max = r.rows.iter().map(|row| row.scores.accuracy).fold(f64::MIN, f64::max);
        assert_eq!(r.rows[r.best].scores.accuracy, max);
        let single = grid_search((&trx, &try_), (&vax, &vay), BaseKind::Tree, Scheme::TwoStep, &depth_grid()[2..3], Objective::WsAcc, &p, 0).unwrap();
        assert_eq!(single.best, 0);
        assert_eq!(single.best_hyper().step1.max_depth, 5);
        assert!(grid_search((&trx, &try_), (&vax, &vay), BaseKind::Tree, Scheme::OneStep, &[], Objective::Accuracy, &p, 0).is_err());
    }

    #[test]
    fn objectives_can_disagree() {
        // rare H class: the stump never predicts H yet wins on ws_acc, deeper
        // trees catch H and win on accuracy
        let (x, y) = data(1500, 5, 0.06);
        let (tr, va) = stratified_split(&y, 0.75, 6);
        let pick = |idx: &[usize]| -> (Vec<Vec<f64>>, Vec<usize>) { (idx.iter().map(|&i| x[i].clone()).collect(), idx.iter().map(|&i| y[i]).collect()) };
        let (trx, try_) = pick(&tr);
        let (vax, vay) = pick(&va);
        let p = PenaltyMatrices::default();
        let grid: Vec<TwoStepHyper> = (1..=8).map(|d| TwoStepHyper::same(Hyper::tree(d))).collect();
        let acc = grid_search((&trx, &try_), (&vax, &vay), BaseKind::Tree, Scheme::OneStep, &grid, Objective::Accuracy, &p, 0).unwrap();
        let wa = grid_search((&trx, &try_), (&vax, &vay), BaseKind::Tree, Scheme::OneStep, &grid, Objective::WsAcc, &p, 0).unwrap();
        assert_ne!(acc.best, wa.best);
        // the table is the same either way; only the argmax differs
        assert_eq!(acc.rows.iter().map(|r| r.scores).collect::<Vec<_>>(), wa.rows.iter().map(|r| r.scores).collect::<Vec<_>>());
        assert!(acc.rows[acc.best].scores.accuracy > acc.rows[wa.best].scores.accuracy);
        assert!(wa.rows[wa.best].scores.ws_acc > wa.rows[acc.best].scores.ws_acc);
    }
}
