//! Gradient boosting on log-odds with logistic loss. Each round fits a
//! variance-split regression tree to the negative gradients (residuals) and
//! installs Newton-step leaf values; the output is the sigmoid of the
//! accumulated scores.

use super::tree::{grow_tree, SplitCriterion, TreeNode, TreeParams};
use super::ModelError;
use crate::util::matrix::Matrix;
use crate::util::rng::{derive_seed, Rng};
use crate::util::stats::{logit, sigmoid};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct BoostedParams {
    pub n_rounds: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for BoostedParams {
    fn default() -> Self {
        BoostedParams {
            n_rounds: 100,
            max_depth: 4,
            learning_rate: 0.1,
            seed: 42,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoostedModel {
    /// Prior log-odds; the model output before any round.
    pub base_score: f64,
    pub learning_rate: f64,
    pub trees: Vec<TreeNode>,
    pub n_features: usize,
    /// Training log-loss after each round, for monotonicity checks.
    pub train_loss: Vec<f64>,
}

impl BoostedModel {
    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn decision(&self, row: &[f64]) -> f64 {
        let mut score = self.base_score;
        for tree in &self.trees {
            score += self.learning_rate * tree.predict_row(row);
        }
        score
    }

    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        x.rows().map(|row| sigmoid(self.decision(row))).collect()
    }

    pub fn feature_gains(&self) -> Vec<f64> {
        let mut gains = vec![0.0; self.n_features];
        for tree in &self.trees {
            tree.accumulate_gains(&mut gains);
        }
        gains
    }
}

fn log_loss(scores: &[f64], y: &[u8]) -> f64 {
    let mut loss = 0.0;
    for (&s, &yi) in scores.iter().zip(y) {
        let p = sigmoid(s).clamp(1e-12, 1.0 - 1e-12);
        loss -= if yi == 1 { p.ln() } else { (1.0 - p).ln() };
    }
    loss / y.len() as f64
}

pub fn train_boosted(x: &Matrix, y: &[u8], params: &BoostedParams) -> Result<BoostedModel, ModelError> {
    let n = x.n_rows();
    if n == 0 {
        return Err(ModelError::EmptyTrainingSet);
    }
    let prior = y.iter().map(|&v| v as f64).sum::<f64>() / n as f64;
    let base_score = logit(prior);
    let mut scores = vec![base_score; n];
    let tree_params = TreeParams {
        max_depth: params.max_depth,
        min_samples_split: 2,
        criterion: SplitCriterion::Variance,
        feature_subsample: None,
    };

    let mut trees = Vec::with_capacity(params.n_rounds);
    let mut train_loss = Vec::with_capacity(params.n_rounds);
    let indices: Vec<usize> = (0..n).collect();
    for round in 0..params.n_rounds {
        let probs: Vec<f64> = scores.iter().map(|&s| sigmoid(s)).collect();
        let residuals: Vec<f64> = probs
            .iter()
            .zip(y)
            .map(|(&p, &yi)| yi as f64 - p)
            .collect();
        // Newton step per leaf: sum(residual) / sum(p (1 - p)).
        let leaf_value = |idx: &[usize]| -> f64 {
            let num: f64 = idx.iter().map(|&i| residuals[i]).sum();
            let den: f64 = idx.iter().map(|&i| probs[i] * (1.0 - probs[i])).sum();
            (num / den.max(1e-12)).clamp(-4.0, 4.0)
        };
        let mut rng = Rng::new(derive_seed(params.seed, round as u64));
        let tree = grow_tree(x, &residuals, &indices, &tree_params, &leaf_value, &mut rng);
        for (i, s) in scores.iter_mut().enumerate() {
            *s += params.learning_rate * tree.predict_row(x.row(i));
        }
        let loss = log_loss(&scores, y);
        if !loss.is_finite() {
            return Err(ModelError::NonFinite("boosted training"));
        }
        train_loss.push(loss);
        trees.push(tree);
    }
    Ok(BoostedModel {
        base_score,
        learning_rate: params.learning_rate,
        trees,
        n_features: x.n_cols(),
        train_loss,
    })
}
