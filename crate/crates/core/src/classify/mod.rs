//! Missing-rating prediction from network-derived predictors.

mod eval;
mod features;
mod grid;
mod mlp;
mod model;
mod optim;
mod smote;
mod softmax;
mod tree;
mod twostep;

pub use eval::{evaluate, random_baseline, simulate_two_step_baseline, Baseline, ConfusionMatrix, PenaltyMatrices, Scheme, Scores};
pub use features::{
    build_features, feature_names, FeatureTable, Preprocessor, QuantileTransform, DEFAULT_MIN_MODULE_SIZE, KEPT_MODULES,
    N_FEATURES,
};
pub use grid::{depth_grid, grid_search, stratified_split, GridResult, GridRow, Objective};
pub use mlp::{train_mlp, Layer, MlpModel, MlpOptions};
pub use model::{BaseKind, Hyper, Model};
pub use optim::{lbfgs, Minimum};
pub use smote::{smote, SmoteOutput};
pub use softmax::{softmax_objective, train_softmax, SoftmaxModel, SoftmaxOptions};
pub use tree::{train_tree, TreeModel, TreeNode, TreeOptions};
pub use twostep::{
    combine, train_one_step, train_two_step, OneStepModel, Pipeline, PipelineOutput, TiePolicy,
    TwoStepHyper, TwoStepModel,
};

use crate::error::{Error, Result};
use crate::graph::PaymentGraph;
use crate::partition::{louvain_best, minimize_agony, AgonyMode, RankedPartition};

/// Index of the largest entry, the first on ties.
pub fn argmax(p: &[f64]) -> usize {
    (0..p.len()).fold(0, |b, i| if p[i] > p[b] { i } else { b })
}

/// Checks shape, finiteness and label range; returns the feature count.
pub(crate) fn check_data(x: &[Vec<f64>], y: &[usize], k: usize) -> Result<usize> {
    if x.is_empty() || x.len() != y.len() {
        return Err(Error::invalid(format!("{} rows with {} labels", x.len(), y.len())));
    }
    let p = x[0].len();
    if p == 0 {
        return Err(Error::invalid("rows have no features"));
    }
    for (i, row) in x.iter().enumerate() {
        if row.len() != p {
            return Err(Error::invalid(format!("row {i} has {} features, expected {p}", row.len())));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("row {i} has a non-finite feature")));
        }
    }
    if let Some(&bad) = y.iter().find(|&&l| l >= k) {
        return Err(Error::invalid(format!("label {bad} outside 0..{k}")));
    }
    Ok(p)
}

pub(crate) fn require_classes(y: &[usize], at_least: usize) -> Result<()> {
    let mut seen: Vec<usize> = y.to_vec();
    seen.sort_unstable();
    seen.dedup();
    if seen.len() < at_least {
        return Err(Error::invalid(format!("training labels cover {} classes, need {at_least}", seen.len())));
    }
    Ok(())
}

/// Modules, hierarchy and fitted preprocessing for a graph.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkContext {
    pub modules: RankedPartition,
    pub hierarchy: RankedPartition,
    pub preprocessor: Preprocessor,
}

/// Runs Louvain (best of `louvain_seeds`) and heuristic agony on `g`, then
/// fits the preprocessing.
pub fn network_context(g: &PaymentGraph, louvain_seeds: &[u64], min_module_size: usize) -> Result<NetworkContext> {
    let modules = louvain_best(g, louvain_seeds)?;
    let hierarchy = minimize_agony(g, AgonyMode::Heuristic)?;
    let preprocessor = Preprocessor::fit(g, &modules, &hierarchy, min_module_size)?;
    Ok(NetworkContext { modules, hierarchy, preprocessor })
}
