//! Weighted ridge surrogate with top-k feature selection: fit on all
//! interpretable features, keep the k largest coefficients, refit on those.

use super::LimeError;
use crate::util::linalg::cholesky_solve;
use crate::util::matrix::Matrix;

#[derive(Clone, Debug)]
pub struct SurrogateFit {
    /// Selected interpretable feature indices, by descending |coefficient|.
    pub selected: Vec<usize>,
    /// Refit coefficients aligned with `selected`.
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    /// Weighted R-squared of the refit.
    pub r2: f64,
    /// First-stage coefficients over all features.
    pub full_coefficients: Vec<f64>,
    pub full_intercept: f64,
    pub ridge_penalty_used: f64,
}

/// Solve the weighted ridge system over `columns` (plus an unpenalized
/// intercept). Escalates the penalty tenfold, up to three times, when the
/// normal equations are numerically singular.
fn ridge_fit(
    z: &Matrix,
    columns: &[usize],
    targets: &[f64],
    weights: &[f64],
    penalty: f64,
) -> Result<(Vec<f64>, f64, f64), LimeError> {
    let k = columns.len();
    let dim = k + 1; // intercept last
    let mut lambda = penalty;
    for _ in 0..4 {
        let mut a = vec![0.0; dim * dim];
        let mut b = vec![0.0; dim];
        for (i, &w) in weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let row = z.row(i);
            let t = targets[i];
            for (p, &cp) in columns.iter().enumerate() {
                let vp = row[cp];
                for (q, &cq) in columns.iter().enumerate().skip(p) {
                    a[p * dim + q] += w * vp * row[cq];
                }
                a[p * dim + k] += w * vp;
                b[p] += w * vp * t;
            }
            a[k * dim + k] += w;
            b[k] += w * t;
        }
        for p in 0..k {
            a[p * dim + p] += lambda;
        }
        a[k * dim + k] += 1e-10; // keep the intercept row positive definite
        for p in 0..dim {
            for q in 0..p {
                a[p * dim + q] = a[q * dim + p];
            }
        }
        if let Some(solution) = cholesky_solve(&a, &b, dim) {
            let coefficients = solution[..k].to_vec();
            let intercept = solution[k];
            return Ok((coefficients, intercept, lambda));
        }
        lambda *= 10.0;
    }
    Err(LimeError::SingularSystem)
}

fn weighted_r2(
    z: &Matrix,
    columns: &[usize],
    coefficients: &[f64],
    intercept: f64,
    targets: &[f64],
    weights: &[f64],
) -> f64 {
    let w_sum: f64 = weights.iter().sum();
    if w_sum == 0.0 {
        return 0.0;
    }
    let y_bar: f64 = targets
        .iter()
        .zip(weights)
        .map(|(t, w)| t * w)
        .sum::<f64>()
        / w_sum;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        let row = z.row(i);
        let pred: f64 = intercept
            + columns
                .iter()
                .zip(coefficients)
                .map(|(&c, beta)| beta * row[c])
                .sum::<f64>();
        ss_res += w * (targets[i] - pred) * (targets[i] - pred);
        ss_tot += w * (targets[i] - y_bar) * (targets[i] - y_bar);
    }
    if ss_tot == 0.0 {
        if ss_res < 1e-12 {
            1.0
        } else {
            0.0
        }
    } else {
        1.0 - ss_res / ss_tot
    }
}

pub fn fit_surrogate(
    z_interpretable: &Matrix,
    f_probs: &[f64],
    weights: &[f64],
    top_k: usize,
    ridge_penalty: f64,
) -> Result<SurrogateFit, LimeError> {
    // Rescale to mean weight 1 so the penalty strength does not depend on
    // how much mass the proximity kernel happens to spread.
    let w_sum: f64 = weights.iter().sum();
    let weights: Vec<f64> = if w_sum > 0.0 {
        let scale = weights.len() as f64 / w_sum;
        weights.iter().map(|w| w * scale).collect()
    } else {
        vec![1.0; weights.len()]
    };
    let weights = weights.as_slice();
    let d = z_interpretable.n_cols();
    let all: Vec<usize> = (0..d).collect();
    let (full_coefficients, full_intercept, lambda_full) =
        ridge_fit(z_interpretable, &all, f_probs, weights, ridge_penalty)?;

    let k = top_k.min(d);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        full_coefficients[b]
            .abs()
            .partial_cmp(&full_coefficients[a].abs())
            .unwrap()
            .then(a.cmp(&b))
    });
    let mut selected: Vec<usize> = order.into_iter().take(k).collect();
    selected.sort_unstable();

    let (coefficients, intercept, lambda) = ridge_fit(
        z_interpretable,
        &selected,
        f_probs,
        weights,
        ridge_penalty.max(lambda_full),
    )?;
    let r2 = weighted_r2(
        z_interpretable,
        &selected,
        &coefficients,
        intercept,
        f_probs,
        weights,
    );

    // order the selection by descending refit magnitude
    let mut paired: Vec<(usize, f64)> = selected.into_iter().zip(coefficients).collect();
    paired.sort_by(|a, b| b.1.abs().partial_cmp(&a.1.abs()).unwrap().then(a.0.cmp(&b.0)));
    let (selected, coefficients): (Vec<usize>, Vec<f64>) = paired.into_iter().unzip();

    Ok(SurrogateFit {
        selected,
        coefficients,
        intercept,
        r2,
        full_coefficients,
        full_intercept,
        ridge_penalty_used: lambda,
    })
}

/// Weighted penalized objective of a coefficient vector restricted to
/// `columns`: sum_i w_i (y_i - pred_i)^2 + lambda * |beta|^2.
pub fn penalized_objective(
    z: &Matrix,
    columns: &[usize],
    coefficients: &[f64],
    intercept: f64,
    targets: &[f64],
    weights: &[f64],
    lambda: f64,
) -> f64 {
    let mut obj = lambda * coefficients.iter().map(|c| c * c).sum::<f64>();
    for (i, &w) in weights.iter().enumerate() {
        let row = z.row(i);
        let pred: f64 = intercept
            + columns
                .iter()
                .zip(coefficients)
                .map(|(&c, beta)| beta * row[c])
                .sum::<f64>();
        obj += w * (targets[i] - pred) * (targets[i] - pred);
    }
    obj
}
