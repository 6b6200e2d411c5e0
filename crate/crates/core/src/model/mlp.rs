//! Feed-forward binary classifier: ReLU hidden layers, sigmoid output,
//! binary cross-entropy loss, trained by Adam over mini-batches with
//! backpropagation implemented in-module.

use super::{ModelError, Standardizer};
use crate::util::matrix::Matrix;
use crate::util::rng::Rng;
use crate::util::stats::sigmoid;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MlpParams {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for MlpParams {
    fn default() -> Self {
        MlpParams {
            hidden: vec![35, 35],
            learning_rate: 1e-3,
            batch_size: 128,
            epochs: 20,
            seed: 42,
        }
    }
}

/// Weights are row-major `n_out x n_in`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DenseLayer {
    pub n_in: usize,
    pub n_out: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MlpModel {
    pub layers: Vec<DenseLayer>,
    pub norm: Standardizer,
}

struct LayerGrad {
    w: Vec<f64>,
    b: Vec<f64>,
}

impl MlpModel {
    pub fn n_features(&self) -> usize {
        self.layers[0].n_in
    }

    /// All-zero weights with identity standardization; the network outputs
    /// sigmoid(0) = 0.5 everywhere until trained.
    pub fn with_zero_weights(n_in: usize, hidden: &[usize]) -> Self {
        let mut layers = Vec::new();
        let mut prev = n_in;
        for &width in hidden.iter().chain(std::iter::once(&1)) {
            layers.push(DenseLayer {
                n_in: prev,
                n_out: width,
                w: vec![0.0; width * prev],
                b: vec![0.0; width],
            });
            prev = width;
        }
        MlpModel {
            layers,
            norm: Standardizer {
                mean: vec![0.0; n_in],
                sd: vec![1.0; n_in],
            },
        }
    }

    fn forward_scores(&self, row_std: &[f64]) -> f64 {
        let mut activation = row_std.to_vec();
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let mut next = vec![0.0; layer.n_out];
            for o in 0..layer.n_out {
                let mut z = layer.b[o];
                let row = &layer.w[o * layer.n_in..(o + 1) * layer.n_in];
                for (wj, a) in row.iter().zip(&activation) {
                    z += wj * a;
                }
                next[o] = if l == last { z } else { z.max(0.0) };
            }
            activation = next;
        }
        activation[0]
    }

    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        let mut buf = vec![0.0; self.n_features()];
        x.rows()
            .map(|row| {
                self.norm.apply_row(row, &mut buf);
                sigmoid(self.forward_scores(&buf))
            })
            .collect()
    }

    /// Mean BCE over the batch and its gradient with respect to every
    /// parameter, in `flatten_params` order. Used by training and by the
    /// finite-difference checks.
    pub fn loss_and_grad(&self, x: &Matrix, y: &[u8]) -> (f64, Vec<f64>) {
        let n = x.n_rows();
        let mut grads: Vec<LayerGrad> = self
            .layers
            .iter()
            .map(|l| LayerGrad {
                w: vec![0.0; l.w.len()],
                b: vec![0.0; l.b.len()],
            })
            .collect();
        let mut loss = 0.0;
        let mut buf = vec![0.0; self.n_features()];
        let last = self.layers.len() - 1;
        for (row, &yi) in x.rows().zip(y) {
            self.norm.apply_row(row, &mut buf);
            // forward, keeping pre-activations
            let mut activations: Vec<Vec<f64>> = vec![buf.clone()];
            let mut pre: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
            for (l, layer) in self.layers.iter().enumerate() {
                let input = activations.last().unwrap();
                let mut z = vec![0.0; layer.n_out];
                for o in 0..layer.n_out {
                    let wrow = &layer.w[o * layer.n_in..(o + 1) * layer.n_in];
                    z[o] = layer.b[o]
                        + wrow.iter().zip(input).map(|(w, a)| w * a).sum::<f64>();
                }
                let a = if l == last {
                    z.clone()
                } else {
                    z.iter().map(|v| v.max(0.0)).collect()
                };
                pre.push(z);
                activations.push(a);
            }
            let score = activations.last().unwrap()[0];
            let p = sigmoid(score);
            let yf = yi as f64;
            loss += softplus(score) - yf * score;

            // backward
            let mut delta = vec![(p - yf) / n as f64];
            for l in (0..self.layers.len()).rev() {
                let layer = &self.layers[l];
                let input = &activations[l];
                for o in 0..layer.n_out {
                    grads[l].b[o] += delta[o];
                    let wrow = &mut grads[l].w[o * layer.n_in..(o + 1) * layer.n_in];
                    for (g, a) in wrow.iter_mut().zip(input) {
                        *g += delta[o] * a;
                    }
                }
                if l > 0 {
                    let mut prev_delta = vec![0.0; layer.n_in];
                    for o in 0..layer.n_out {
                        let wrow = &layer.w[o * layer.n_in..(o + 1) * layer.n_in];
                        for (pd, w) in prev_delta.iter_mut().zip(wrow) {
                            *pd += delta[o] * w;
                        }
                    }
                    // relu mask from the previous layer's pre-activation
                    for (pd, &z) in prev_delta.iter_mut().zip(&pre[l - 1]) {
                        if z <= 0.0 {
                            *pd = 0.0;
                        }
                    }
                    delta = prev_delta;
                }
            }
        }
        let flat: Vec<f64> = grads
            .iter()
            .flat_map(|g| g.w.iter().chain(g.b.iter()).copied())
            .collect();
        (loss / n as f64, flat)
    }

    pub fn flatten_params(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.w.iter().chain(l.b.iter()).copied())
            .collect()
    }

    pub fn set_params(&mut self, flat: &[f64]) {
        let mut k = 0;
        for layer in &mut self.layers {
            let (nw, nb) = (layer.w.len(), layer.b.len());
            layer.w.copy_from_slice(&flat[k..k + nw]);
            k += nw;
            layer.b.copy_from_slice(&flat[k..k + nb]);
            k += nb;
        }
        assert_eq!(k, flat.len());
    }
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

pub fn train_mlp(x: &Matrix, y: &[u8], params: &MlpParams) -> Result<MlpModel, ModelError> {
    let n = x.n_rows();
    if n == 0 {
        return Err(ModelError::EmptyTrainingSet);
    }
    let norm = Standardizer::fit(x);
    let mut rng = Rng::new(params.seed);

    // He-uniform initialization.
    let mut layers = Vec::new();
    let mut prev = x.n_cols();
    for &width in params.hidden.iter().chain(std::iter::once(&1)) {
        let bound = (6.0 / prev as f64).sqrt();
        let w: Vec<f64> = (0..width * prev)
            .map(|_| (rng.uniform() * 2.0 - 1.0) * bound)
            .collect();
        layers.push(DenseLayer {
            n_in: prev,
            n_out: width,
            w,
            b: vec![0.0; width],
        });
        prev = width;
    }
    let mut model = MlpModel { layers, norm };

    let mut theta = model.flatten_params();
    let mut m1 = vec![0.0; theta.len()];
    let mut m2 = vec![0.0; theta.len()];
    let (beta1, beta2, eps): (f64, f64, f64) = (0.9, 0.999, 1e-8);
    let mut step = 0u64;
    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..params.epochs {
        rng.shuffle(&mut order);
        for batch in order.chunks(params.batch_size.max(1)) {
            step += 1;
            let xb = x.select_rows(batch);
            let yb: Vec<u8> = batch.iter().map(|&i| y[i]).collect();
            let (loss, grad) = model.loss_and_grad(&xb, &yb);
            if !loss.is_finite() {
                return Err(ModelError::NonFinite("mlp training"));
            }
            let b1c = 1.0 - beta1.powi(step as i32);
            let b2c = 1.0 - beta2.powi(step as i32);
            for k in 0..theta.len() {
                m1[k] = beta1 * m1[k] + (1.0 - beta1) * grad[k];
                m2[k] = beta2 * m2[k] + (1.0 - beta2) * grad[k] * grad[k];
                theta[k] -=
                    params.learning_rate * (m1[k] / b1c) / ((m2[k] / b2c).sqrt() + eps);
            }
            model.set_params(&theta);
        }
    }
    Ok(model)
}
