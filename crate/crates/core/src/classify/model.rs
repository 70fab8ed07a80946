//! A common face for the three base learners.

use serde::{Deserialize, Serialize};

use super::mlp::{train_mlp, MlpModel, MlpOptions};
use super::softmax::{train_softmax, SoftmaxModel, SoftmaxOptions};
use super::tree::{train_tree, TreeModel, TreeOptions};
use super::argmax;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseKind {
    Softmax,
    Tree,
    Mlp,
}

impl BaseKind {
    pub const ALL: [BaseKind; 3] = [BaseKind::Softmax, BaseKind::Tree, BaseKind::Mlp];

    pub fn as_str(self) -> &'static str {
        match self {
            BaseKind::Softmax => "softmax",
            BaseKind::Tree => "tree",
            BaseKind::Mlp => "mlp",
        }
    }
}

impl std::str::FromStr for BaseKind {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "softmax" => Ok(BaseKind::Softmax),
            "tree" => Ok(BaseKind::Tree),
            "mlp" => Ok(BaseKind::Mlp),
            other => Err(crate::error::Error::invalid(format!("unknown base learner `{other}`"))),
        }
    }
}

/// Hyper-parameters for any base learner; each learner reads its own fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyper {
    pub l2: f64,
    pub max_iter: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
}

impl Default for Hyper {
    fn default() -> Self {
        let s = SoftmaxOptions::default();
        let t = TreeOptions::default();
        let m = MlpOptions::default();
        Hyper {
            l2: s.l2,
            max_iter: s.max_iter,
            max_depth: t.max_depth,
            min_leaf: t.min_leaf,
            hidden: m.hidden,
            epochs: m.epochs,
            learning_rate: m.learning_rate,
            batch_size: m.batch_size,
        }
    }
}

impl Hyper {
    pub fn tree(max_depth: usize) -> Self {
        Hyper { max_depth, ..Hyper::default() }
    }

    pub fn mlp(hidden: Vec<usize>) -> Self {
        Hyper { hidden, ..Hyper::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    Softmax(SoftmaxModel),
    Tree(TreeModel),
    Mlp(MlpModel),
}

impl Model {
    pub fn train(base: BaseKind, hyper: &Hyper, x: &[Vec<f64>], y: &[usize], k: usize, seed: u64) -> Result<Model> {
        Ok(match base {
            BaseKind::Softmax => Model::Softmax(train_softmax(
                x,
                y,
                k,
                &SoftmaxOptions { l2: hyper.l2, max_iter: hyper.max_iter, ..SoftmaxOptions::default() },
            )?),
            BaseKind::Tree => {
                Model::Tree(train_tree(x, y, k, &TreeOptions { max_depth: hyper.max_depth, min_leaf: hyper.min_leaf })?)
            }
            BaseKind::Mlp => Model::Mlp(train_mlp(
                x,
                y,
                k,
                &MlpOptions {
                    hidden: hyper.hidden.clone(),
                    epochs: hyper.epochs,
                    learning_rate: hyper.learning_rate,
                    batch_size: hyper.batch_size,
                    seed,
                },
            )?),
        })
    }

    pub fn kind(&self) -> BaseKind {
        match self {
            Model::Softmax(_) => BaseKind::Softmax,
            Model::Tree(_) => BaseKind::Tree,
            Model::Mlp(_) => BaseKind::Mlp,
        }
    }

    pub fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Model::Softmax(m) => m.predict_proba(x),
            Model::Tree(m) => m.predict_proba(x),
            Model::Mlp(m) => m.predict_proba(x),
        }
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        argmax(&self.predict_proba(x))
    }
}
