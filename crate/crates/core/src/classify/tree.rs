//! CART classification tree with Gini impurity.

use serde::{Deserialize, Serialize};

use super::check_data;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeOptions {
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for TreeOptions {
    fn default() -> Self {
        TreeOptions { max_depth: 6, min_leaf: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TreeNode {
    Leaf { counts: Vec<usize>, class: usize },
    /// Rows with `x[feature] <= threshold` go left.
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    /// Node 0 is the root.
    pub nodes: Vec<TreeNode>,
    pub n_classes: usize,
    pub depth: usize,
}

fn gini(counts: &[usize], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [usize],
    k: usize,
    opts: &'a TreeOptions,
    nodes: Vec<TreeNode>,
    depth: usize,
}

impl Builder<'_> {
    fn leaf(&mut self, counts: Vec<usize>) -> usize {
        // ties go to the lowest class
        let class = (0..self.k).fold(0, |best, c| if counts[c] > counts[best] { c } else { best });
        self.nodes.push(TreeNode::Leaf { counts, class });
        self.nodes.len() - 1
    }

    /// Best `(feature, threshold, decrease)` among splits leaving at least
    /// `min_leaf` rows per side. Zero-gain splits are allowed.
    fn best_split(&self, rows: &[usize], counts: &[usize]) -> Option<(usize, f64)> {
        let n = rows.len();
        let parent = gini(counts, n);
        let p = self.x[rows[0]].len();
        let mut best: Option<(usize, f64, f64)> = None;
        let mut sorted = rows.to_vec();
        let mut left = vec![0usize; self.k];
        let mut right = vec![0usize; self.k];
        for f in 0..p {
            sorted.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]).then(a.cmp(&b)));
            left.iter_mut().for_each(|c| *c = 0);
            right.copy_from_slice(counts);
            for i in 0..n - 1 {
                let label = self.y[sorted[i]];
                left[label] += 1;
                right[label] -= 1;
                let nl = i + 1;
                if nl < self.opts.min_leaf || n - nl < self.opts.min_leaf {
                    continue;
                }
                let (a, b) = (self.x[sorted[i]][f], self.x[sorted[i + 1]][f]);
                if a == b {
                    continue;
                }
                let child = (nl as f64 * gini(&left, nl) + (n - nl) as f64 * gini(&right, n - nl)) / n as f64;
                let decrease = parent - child;
                if best.is_none_or(|(_, _, d)| decrease > d + 1e-12) {
                    let mid = a + (b - a) / 2.0;
                    // guard against the midpoint rounding onto b
                    let threshold = if mid < b { mid } else { a };
                    best = Some((f, threshold, decrease));
                }
            }
        }
        best.map(|(f, t, _)| (f, t))
    }

    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        self.depth = self.depth.max(depth);
        let mut counts = vec![0usize; self.k];
        rows.iter().for_each(|&r| counts[self.y[r]] += 1);
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if pure || depth >= self.opts.max_depth || rows.len() < 2 * self.opts.min_leaf {
            return self.leaf(counts);
        }
        let Some((feature, threshold)) = self.best_split(&rows, &counts) else {
            return self.leaf(counts);
        };
        let (l, r): (Vec<usize>, Vec<usize>) = rows.into_iter().partition(|&i| self.x[i][feature] <= threshold);
        let id = self.nodes.len();
        self.nodes.push(TreeNode::Split { feature, threshold, left: 0, right: 0 });
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[id] = TreeNode::Split { feature, threshold, left, right };
        id
    }
}

/// Greedy top-down growth; a node becomes a leaf when pure, at
/// `max_depth`, or when no split leaves `min_leaf` rows on both sides.
pub fn train_tree(x: &[Vec<f64>], y: &[usize], k: usize, opts: &TreeOptions) -> Result<TreeModel> {
    if !(1..=30).contains(&opts.max_depth) {
        return Err(Error::invalid(format!("max_depth {} outside 1..=30", opts.max_depth)));
    }
    check_data(x, y, k)?;
    let mut b = Builder { x, y, k, opts, nodes: Vec::new(), depth: 0 };
    b.grow((0..x.len()).collect(), 0);
    Ok(TreeModel { nodes: b.nodes, n_classes: k, depth: b.depth })
}

impl TreeModel {
    fn leaf_counts(&self, x: &[f64]) -> &[usize] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                TreeNode::Leaf { counts, .. } => return counts,
                TreeNode::Split { feature, threshold, left, right } => {
                    i = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    /// Class frequencies in the leaf reached by `x`.
    pub fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        let counts = self.leaf_counts(x);
        let n: usize = counts.iter().sum();
        counts.iter().map(|&c| c as f64 / n as f64).collect()
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, TreeNode::Leaf { .. })).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::argmax;

    fn accuracy(m: &TreeModel, x: &[Vec<f64>], y: &[usize]) -> f64 {
        x.iter().zip(y).filter(|(r, &l)| argmax(&m.predict_proba(r)) == l).count() as f64 / y.len() as f64
    }

    #[test]
    fn xor_at_depth_two() {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for (a, b) in [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)] {
            for _ in 0..10 {
                x.push(vec![a, b]);
                y.push(((a + b) as usize) % 2);
            }
        }
        let m = train_tree(&x, &y, 2, &TreeOptions { max_depth: 2, min_leaf: 5 }).unwrap();
        assert_eq!(accuracy(&m, &x, &y), 1.0);
        assert!(m.depth <= 2);
    }

    #[test]
    fn stump_predicts_at_most_two_classes() {
        let x: Vec<Vec<f64>> = (0..90).map(|i| vec![i as f64]).collect();
        let y: Vec<usize> = (0..90).map(|i| i / 30).collect();
        let m = train_tree(&x, &y, 3, &TreeOptions { max_depth: 1, min_leaf: 5 }).unwrap();
        let mut seen: Vec<usize> = x.iter().map(|r| argmax(&m.predict_proba(r))).collect();
        seen.sort();
        seen.dedup();
        assert!(seen.len() <= 2);
        assert_eq!(m.n_leaves(), 2);
    }

    #[test]
    fn pure_labels_single_leaf() {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64]).collect();
        let m = train_tree(&x, &[1; 20], 2, &TreeOptions::default()).unwrap();
        assert_eq!(m.nodes.len(), 1);
        assert_eq!(m.predict_proba(&[3.0]), vec![0.0, 1.0]);
        let mut y = vec![1; 20];
        y[0] = 0;
        let m = train_tree(&x, &y, 2, &TreeOptions { max_depth: 5, min_leaf: 5 }).unwrap();
        // a lone class-0 row cannot fill a leaf of 5
        assert!(x.iter().all(|r| argmax(&m.predict_proba(r)) == 1));
    }

    #[test]
    fn depth_and_leaf_size_respected() {
        let x: Vec<Vec<f64>> = (0..200).map(|i| vec![((i * 37) % 200) as f64, (i % 7) as f64]).collect();
        let y: Vec<usize> = (0..200).map(|i| (i * 13 % 3) as usize).collect();
        let m = train_tree(&x, &y, 3, &TreeOptions { max_depth: 4, min_leaf: 5 }).unwrap();
        assert!(m.depth <= 4);
        for n in &m.nodes {
            if let TreeNode::Leaf { counts, .. } = n {
                assert!(counts.iter().sum::<usize>() >= 5);
            }
        }
        assert!(train_tree(&x, &y, 3, &TreeOptions { max_depth: 0, min_leaf: 5 }).is_err());
        assert!(train_tree(&x, &y, 3, &TreeOptions { max_depth: 31, min_leaf: 5 }).is_err());
    }
}
