//! CART trees shared by the forest (Gini splits on class labels) and the
//! booster (variance splits on residuals). Split gains are count-weighted
//! impurity decreases, accumulated per feature for importance scores.

use crate::util::matrix::Matrix;
use crate::util::rng::Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        value: f64,
        n_samples: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        gain: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SplitCriterion {
    Gini,
    Variance,
}

#[derive(Clone, Debug)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub criterion: SplitCriterion,
    /// Features scanned per split; `None` means all.
    pub feature_subsample: Option<usize>,
}

impl TreeNode {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { value, .. } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    node = if row[*feature] <= *threshold {
                        left
                    } else {
                        right
                    };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    /// Add each split's gain to its feature's slot.
    pub fn accumulate_gains(&self, gains: &mut [f64]) {
        if let TreeNode::Split {
            feature,
            gain,
            left,
            right,
            ..
        } = self
        {
            gains[*feature] += gain;
            left.accumulate_gains(gains);
            right.accumulate_gains(gains);
        }
    }
}

fn impurity(criterion: SplitCriterion, sum: f64, sum_sq: f64, n: f64) -> f64 {
    match criterion {
        // targets are 0/1 so the class fraction is the mean
        SplitCriterion::Gini => {
            let p = sum / n;
            2.0 * p * (1.0 - p)
        }
        SplitCriterion::Variance => sum_sq / n - (sum / n) * (sum / n),
    }
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    gain: f64,
}

/// Grow a tree over `indices`. `leaf_value` computes a leaf's output from
/// the sample indices that land in it, which lets the booster install
/// Newton-step values while the forest uses plain class fractions.
pub fn grow_tree(
    x: &Matrix,
    targets: &[f64],
    indices: &[usize],
    params: &TreeParams,
    leaf_value: &dyn Fn(&[usize]) -> f64,
    rng: &mut Rng,
) -> TreeNode {
    grow_node(x, targets, indices, params, leaf_value, rng, 0)
}

fn grow_node(
    x: &Matrix,
    targets: &[f64],
    indices: &[usize],
    params: &TreeParams,
    leaf_value: &dyn Fn(&[usize]) -> f64,
    rng: &mut Rng,
    depth: usize,
) -> TreeNode {
    let n = indices.len();
    let make_leaf = |idx: &[usize]| TreeNode::Leaf {
        value: leaf_value(idx),
        n_samples: idx.len(),
    };
    if depth >= params.max_depth || n < params.min_samples_split {
        return make_leaf(indices);
    }
    let sum: f64 = indices.iter().map(|&i| targets[i]).sum();
    let sum_sq: f64 = indices.iter().map(|&i| targets[i] * targets[i]).sum();
    let parent_impurity = impurity(params.criterion, sum, sum_sq, n as f64);
    if parent_impurity <= 1e-15 {
        return make_leaf(indices);
    }

    let d = x.n_cols();
    let candidates: Vec<usize> = match params.feature_subsample {
        Some(k) if k < d => {
            let mut picked = rng.sample_indices(d, k);
            picked.sort_unstable();
            picked
        }
        _ => (0..d).collect(),
    };

    let mut best: Option<BestSplit> = None;
    let mut column: Vec<(f64, f64)> = Vec::with_capacity(n);
    for &feature in &candidates {
        column.clear();
        column.extend(indices.iter().map(|&i| (x.get(i, feature), targets[i])));
        column.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut left_sum = 0.0;
        let mut left_sq = 0.0;
        for k in 0..n - 1 {
            let (v, t) = column[k];
            left_sum += t;
            left_sq += t * t;
            let next_v = column[k + 1].0;
            if v == next_v {
                continue;
            }
            let nl = (k + 1) as f64;
            let nr = (n - k - 1) as f64;
            let left_imp = impurity(params.criterion, left_sum, left_sq, nl);
            let right_imp =
                impurity(params.criterion, sum - left_sum, sum_sq - left_sq, nr);
            let gain = n as f64 * parent_impurity - nl * left_imp - nr * right_imp;
            if gain > best.as_ref().map_or(1e-12, |b| b.gain) {
                best = Some(BestSplit {
                    feature,
                    threshold: v + (next_v - v) / 2.0,
                    gain,
                });
            }
        }
    }

    let Some(split) = best else {
        return make_leaf(indices);
    };
    let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = indices
        .iter()
        .partition(|&&i| x.get(i, split.feature) <= split.threshold);
    if left_idx.is_empty() || right_idx.is_empty() {
        return make_leaf(indices);
    }
    TreeNode::Split {
        feature: split.feature,
        threshold: split.threshold,
        gain: split.gain,
        left: Box::new(grow_node(
            x, targets, &left_idx, params, leaf_value, rng, depth + 1,
        )),
        right: Box::new(grow_node(
            x, targets, &right_idx, params, leaf_value, rng, depth + 1,
        )),
    }
}
