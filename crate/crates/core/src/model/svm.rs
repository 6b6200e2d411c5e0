//! Linear SVM trained by averaged stochastic subgradient descent on the
//! hinge + L2 objective, over internally standardized features. Two
//! probability mappings are exposed: a Platt-style sigmoid calibrated on a
//! held-out fold (default), and the raw sigmoid of the decision value.

use super::{ModelError, Standardizer};
use crate::util::matrix::Matrix;
use crate::util::rng::Rng;
use crate::util::stats::sigmoid;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbMethod {
    /// sigmoid(a * d + b) with (a, b) fit by cross-entropy on a held-out
    /// training fold.
    Calibrated,
    /// sigmoid(d) on the raw decision value.
    RawSigmoid,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SvmParams {
    pub c: f64,
    pub epochs: usize,
    /// Fraction of the training rows held out for Platt calibration.
    pub calibration_fraction: f64,
    pub seed: u64,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            c: 1.0,
            epochs: 30,
            calibration_fraction: 0.2,
            seed: 42,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SvmModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub platt_a: f64,
    pub platt_b: f64,
    pub default_method: ProbMethod,
    pub norm: Standardizer,
}

impl SvmModel {
    pub fn n_features(&self) -> usize {
        self.weights.len()
    }

    /// Signed distance-like decision value w.x + b in standardized space.
    pub fn decision(&self, x: &Matrix) -> Vec<f64> {
        let mut buf = vec![0.0; self.weights.len()];
        x.rows()
            .map(|row| {
                self.norm.apply_row(row, &mut buf);
                self.weights
                    .iter()
                    .zip(&buf)
                    .map(|(w, v)| w * v)
                    .sum::<f64>()
                    + self.bias
            })
            .collect()
    }

    pub fn probabilities(&self, x: &Matrix, method: ProbMethod) -> Vec<f64> {
        self.decision(x)
            .into_iter()
            .map(|d| match method {
                ProbMethod::Calibrated => sigmoid(self.platt_a * d + self.platt_b),
                ProbMethod::RawSigmoid => sigmoid(d),
            })
            .collect()
    }

    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        self.probabilities(x, self.default_method)
    }
}

pub fn train_svm_linear(x: &Matrix, y: &[u8], params: &SvmParams) -> Result<SvmModel, ModelError> {
    let n = x.n_rows();
    if n == 0 {
        return Err(ModelError::EmptyTrainingSet);
    }
    let norm = Standardizer::fit(x);
    let xs = norm.apply(x);
    let d = xs.n_cols();

    // Label-independent calibration fold, so symmetric transformations of
    // the labels leave the fold membership unchanged.
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = Rng::new(params.seed);
    rng.shuffle(&mut order);
    let n_cal = ((n as f64 * params.calibration_fraction).round() as usize).min(n.saturating_sub(2));
    let (cal_idx, fit_idx) = order.split_at(n_cal);

    // Pegasos-style averaged subgradient on the fit fold. The bias rides
    // along as a constant feature so every coordinate shares the same
    // (stable) regularized update; iterates from the first epoch are
    // excluded from the average.
    let n_fit = fit_idx.len();
    let lambda = 1.0 / (params.c * n_fit as f64);
    let warmup = 2.0 * n_fit as f64;
    let mut w = vec![0.0; d + 1];
    let mut w_avg = vec![0.0; d + 1];
    let mut steps = 0u64;
    let mut averaged = 0u64;
    let mut epoch_order = fit_idx.to_vec();
    for epoch in 0..params.epochs {
        rng.shuffle(&mut epoch_order);
        for &i in &epoch_order {
            steps += 1;
            let eta = 1.0 / (lambda * (steps as f64 + warmup));
            let yi = if y[i] == 1 { 1.0 } else { -1.0 };
            let row = xs.row(i);
            let margin: f64 = yi
                * (w[..d].iter().zip(row).map(|(wj, v)| wj * v).sum::<f64>() + w[d]);
            let shrink = 1.0 - eta * lambda;
            for wj in w.iter_mut() {
                *wj *= shrink;
            }
            if margin < 1.0 {
                for (wj, v) in w[..d].iter_mut().zip(row) {
                    *wj += eta * yi * v;
                }
                w[d] += eta * yi;
            }
            if epoch > 0 || params.epochs == 1 {
                averaged += 1;
                for (a, wj) in w_avg.iter_mut().zip(&w) {
                    *a += wj;
                }
            }
        }
    }
    let scale = 1.0 / averaged.max(1) as f64;
    let w_final: Vec<f64> = w_avg[..d].iter().map(|v| v * scale).collect();
    let b_final = w_avg[d] * scale;

    // Platt calibration on the held-out fold.
    let decisions: Vec<f64> = cal_idx
        .iter()
        .map(|&i| {
            w_final
                .iter()
                .zip(xs.row(i))
                .map(|(wj, v)| wj * v)
                .sum::<f64>()
                + b_final
        })
        .collect();
    let labels: Vec<u8> = cal_idx.iter().map(|&i| y[i]).collect();
    let (platt_a, platt_b) = fit_platt(&decisions, &labels);

    Ok(SvmModel {
        weights: w_final,
        bias: b_final,
        platt_a,
        platt_b,
        default_method: ProbMethod::Calibrated,
        norm,
    })
}

/// Minimize cross-entropy of sigmoid(a*d + b) by Newton iterations.
/// Falls back to the identity mapping when the fold is single-class.
fn fit_platt(decisions: &[f64], labels: &[u8]) -> (f64, f64) {
    let pos = labels.iter().filter(|&&l| l == 1).count();
    if decisions.len() < 4 || pos == 0 || pos == labels.len() {
        return (1.0, 0.0);
    }
    let mut a = 1.0f64;
    let mut b = 0.0f64;
    for _ in 0..100 {
        let mut g = [0.0f64; 2];
        let mut h = [0.0f64; 3]; // [h_aa, h_ab, h_bb]
        for (&d, &l) in decisions.iter().zip(labels) {
            let p = sigmoid(a * d + b);
            let err = p - l as f64;
            g[0] += err * d;
            g[1] += err;
            let s = p * (1.0 - p);
            h[0] += s * d * d;
            h[1] += s * d;
            h[2] += s;
        }
        h[0] += 1e-9;
        h[2] += 1e-9;
        let det = h[0] * h[2] - h[1] * h[1];
        if det.abs() < 1e-300 {
            break;
        }
        let da = (h[2] * g[0] - h[1] * g[1]) / det;
        let db = (h[0] * g[1] - h[1] * g[0]) / det;
        a -= da;
        b -= db;
        if da.abs() < 1e-12 && db.abs() < 1e-12 {
            break;
        }
    }
    (a, b)
}
