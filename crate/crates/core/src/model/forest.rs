//! Bagged CART forest: bootstrap rows per tree, Gini splits over a sqrt(D)
//! feature subsample, leaves holding class fractions. The prediction is the
//! mean of the trees' leaf probabilities.

use super::tree::{grow_tree, SplitCriterion, TreeNode, TreeParams};
use super::ModelError;
use crate::util::matrix::Matrix;
use crate::util::rng::{derive_seed, Rng};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 500,
            max_depth: 20,
            bootstrap: true,
            seed: 42,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<TreeNode>,
    pub n_features: usize,
}

impl ForestModel {
    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        x.rows()
            .map(|row| {
                let sum: f64 = self.trees.iter().map(|t| t.predict_row(row)).sum();
                sum / self.trees.len() as f64
            })
            .collect()
    }

    pub fn feature_gains(&self) -> Vec<f64> {
        let mut gains = vec![0.0; self.n_features];
        for tree in &self.trees {
            tree.accumulate_gains(&mut gains);
        }
        gains
    }
}

pub fn train_forest(x: &Matrix, y: &[u8], params: &ForestParams) -> Result<ForestModel, ModelError> {
    let n = x.n_rows();
    if n == 0 {
        return Err(ModelError::EmptyTrainingSet);
    }
    let targets: Vec<f64> = y.iter().map(|&v| v as f64).collect();
    let d = x.n_cols();
    let subsample = ((d as f64).sqrt().round() as usize).clamp(1, d);
    let tree_params = TreeParams {
        max_depth: params.max_depth,
        min_samples_split: 2,
        criterion: SplitCriterion::Gini,
        feature_subsample: Some(subsample),
    };
    let leaf_value = |idx: &[usize]| -> f64 {
        idx.iter().map(|&i| targets[i]).sum::<f64>() / idx.len() as f64
    };

    let mut trees = Vec::with_capacity(params.n_trees);
    for t in 0..params.n_trees {
        // Per-tree stream so the forest does not depend on build order.
        let mut rng = Rng::new(derive_seed(params.seed, t as u64));
        let indices: Vec<usize> = if params.bootstrap {
            (0..n).map(|_| rng.below(n)).collect()
        } else {
            (0..n).collect()
        };
        trees.push(grow_tree(
            x,
            &targets,
            &indices,
            &tree_params,
            &leaf_value,
            &mut rng,
        ));
    }
    Ok(ForestModel {
        trees,
        n_features: d,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn split_by_first_feature(n: usize) -> (Matrix, Vec<u8>) {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| vec![if i < n / 2 { -1.0 } else { 1.0 }, (i % 7) as f64])
            .collect();
        let y: Vec<u8> = (0..n).map(|i| u8::from(i >= n / 2)).collect();
        (Matrix::from_rows(&rows), y)
    }

    #[test]
    fn perfect_split_reaches_full_accuracy() {
        let (x, y) = split_by_first_feature(40);
        let params = ForestParams {
            n_trees: 20,
            max_depth: 4,
            ..Default::default()
        };
        let m = train_forest(&x, &y, &params).unwrap();
        let probs = m.predict(&x);
        for (p, &yi) in probs.iter().zip(&y) {
            assert_eq!(u8::from(*p >= 0.5), yi);
        }
        // every tree should resolve the separation in one level
        assert!(m.trees.iter().all(|t| t.depth() >= 1));
    }

    #[test]
    fn single_tree_without_bootstrap_matches_cart_oracle() {
        let (x, y) = split_by_first_feature(30);
        let params = ForestParams {
            n_trees: 1,
            max_depth: 6,
            bootstrap: false,
            seed: 5,
        };
        let forest = train_forest(&x, &y, &params).unwrap();

        // oracle: grow the same CART directly
        let targets: Vec<f64> = y.iter().map(|&v| v as f64).collect();
        let idx: Vec<usize> = (0..x.n_rows()).collect();
        let mut rng = Rng::new(derive_seed(5, 0));
        let d = x.n_cols();
        let oracle = grow_tree(
            &x,
            &targets,
            &idx,
            &TreeParams {
                max_depth: 6,
                min_samples_split: 2,
                criterion: SplitCriterion::Gini,
                feature_subsample: Some(((d as f64).sqrt().round() as usize).clamp(1, d)),
            },
            &|idx: &[usize]| idx.iter().map(|&i| targets[i]).sum::<f64>() / idx.len() as f64,
            &mut rng,
        );
        for row in x.rows() {
            assert_eq!(forest.trees[0].predict_row(row), oracle.predict_row(row));
        }
    }

    #[test]
    fn same_seed_same_forest() {
        let (x, y) = split_by_first_feature(24);
        let params = ForestParams {
            n_trees: 8,
            max_depth: 5,
            ..Default::default()
        };
        let a = train_forest(&x, &y, &params).unwrap();
        let b = train_forest(&x, &y, &params).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }
}
