//! L2-regularized logistic regression trained by full-batch gradient
//! descent with backtracking line search. Features are standardized
//! internally; the constants live in the model.

use super::{ModelError, Standardizer};
use crate::util::matrix::Matrix;
use crate::util::stats::{logit, sigmoid};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LogisticParams {
    pub l2: f64,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for LogisticParams {
    fn default() -> Self {
        LogisticParams {
            l2: 1.0,
            max_iters: 5000,
            tol: 1e-6,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub norm: Standardizer,
}

impl LogisticModel {
    /// Assemble a model directly from parameters in the raw feature space
    /// (identity standardization). Used by oracles and bindings.
    pub fn from_parts(weights: Vec<f64>, intercept: f64) -> Self {
        let d = weights.len();
        LogisticModel {
            weights,
            intercept,
            norm: Standardizer {
                mean: vec![0.0; d],
                sd: vec![1.0; d],
            },
        }
    }

    pub fn n_features(&self) -> usize {
        self.weights.len()
    }

    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        let mut buf = vec![0.0; self.weights.len()];
        x.rows()
            .map(|row| {
                self.norm.apply_row(row, &mut buf);
                let z: f64 = self
                    .weights
                    .iter()
                    .zip(&buf)
                    .map(|(w, v)| w * v)
                    .sum::<f64>()
                    + self.intercept;
                sigmoid(z)
            })
            .collect()
    }
}

/// Mean binary cross-entropy with an L2 penalty on the weights (not the
/// intercept), plus its gradient. `theta` is `[w_0..w_D, intercept]` and
/// `x` must already be standardized.
pub fn loss_and_grad(theta: &[f64], x: &Matrix, y: &[u8], l2: f64) -> (f64, Vec<f64>) {
    let n = x.n_rows() as f64;
    let d = x.n_cols();
    let (w, b) = (&theta[..d], theta[d]);
    let mut loss = 0.0;
    let mut grad = vec![0.0; d + 1];
    for (row, &yi) in x.rows().zip(y) {
        let z: f64 = w.iter().zip(row).map(|(wj, v)| wj * v).sum::<f64>() + b;
        let p = sigmoid(z);
        let yi = yi as f64;
        // stable BCE via softplus
        loss += softplus(z) - yi * z;
        let err = p - yi;
        for j in 0..d {
            grad[j] += err * row[j];
        }
        grad[d] += err;
    }
    loss /= n;
    for g in grad.iter_mut() {
        *g /= n;
    }
    for j in 0..d {
        loss += l2 / (2.0 * n) * w[j] * w[j];
        grad[j] += l2 / n * w[j];
    }
    (loss, grad)
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

pub fn train_logistic(
    x: &Matrix,
    y: &[u8],
    params: &LogisticParams,
) -> Result<LogisticModel, ModelError> {
    if x.n_rows() == 0 {
        return Err(ModelError::EmptyTrainingSet);
    }
    let norm = Standardizer::fit(x);
    let xs = norm.apply(x);
    let d = xs.n_cols();

    let prior = y.iter().map(|&v| v as f64).sum::<f64>() / y.len() as f64;
    let mut theta = vec![0.0; d + 1];
    theta[d] = logit(prior);

    let (mut loss, mut grad) = loss_and_grad(&theta, &xs, y, params.l2);
    let mut step = 1.0f64;
    for _ in 0..params.max_iters {
        if !loss.is_finite() {
            return Err(ModelError::NonFinite("logistic training"));
        }
        let grad_norm: f64 = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if grad_norm < params.tol {
            break;
        }
        // Armijo backtracking along the negative gradient.
        step = (step * 2.0).min(16.0);
        loop {
            let candidate: Vec<f64> = theta
                .iter()
                .zip(&grad)
                .map(|(t, g)| t - step * g)
                .collect();
            let (new_loss, new_grad) = loss_and_grad(&candidate, &xs, y, params.l2);
            if new_loss <= loss - 1e-4 * step * grad_norm * grad_norm {
                theta = candidate;
                loss = new_loss;
                grad = new_grad;
                break;
            }
            step *= 0.5;
            if step < 1e-14 {
                // flat to machine precision
                return Ok(finish(theta, d, norm));
            }
        }
    }
    Ok(finish(theta, d, norm))
}

fn finish(theta: Vec<f64>, d: usize, norm: Standardizer) -> LogisticModel {
    LogisticModel {
        weights: theta[..d].to_vec(),
        intercept: theta[d],
        norm,
    }
}
