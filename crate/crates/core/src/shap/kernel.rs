//! Kernel SHAP: interventional masked predictions over a weighted
//! background, the Shapley kernel coalition weighting, and the constrained
//! weighted least squares solve (the two equality constraints are
//! eliminated by substitution, so local accuracy holds by construction).

use super::{Background, ShapError, ShapResult};
use crate::model::Predictor;
use crate::util::linalg::cholesky_solve;
use crate::util::matrix::Matrix;
use crate::util::rng::Rng;

/// Shapley kernel weight for coalitions of size `s` out of `m` features:
/// (m - 1) / (C(m, s) * s * (m - s)). The empty and full coalitions are
/// constraints, not weighted rows.
pub fn coalition_weight(m: usize, s: usize) -> Result<f64, ShapError> {
    if s == 0 || s >= m {
        return Err(ShapError::DomainError { m, s });
    }
    Ok((m as f64 - 1.0) / (binomial(m, s) * s as f64 * (m - s) as f64))
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    let mut result = 1.0;
    for i in 0..k {
        result *= (n - i) as f64;
        result /= (i + 1) as f64;
    }
    result
}

/// Expected model output with the features in `mask` taken from `x` and the
/// rest from the background rows (interventional expectation).
pub fn masked_prediction<P: Predictor>(
    model: &P,
    x: &[f64],
    mask: &[usize],
    bg: &Background,
) -> f64 {
    let mut bits = 0u64;
    for &j in mask {
        assert!(j < x.len(), "mask index {j} out of range");
        bits |= 1 << j;
    }
    masked_values(model, x, bg, &[bits])[0]
}

/// Batched interventional expectations for many coalition bitmasks.
pub(crate) fn masked_values<P: Predictor>(
    model: &P,
    x: &[f64],
    bg: &Background,
    masks: &[u64],
) -> Vec<f64> {
    let d = x.len();
    assert!(d <= 64, "bitmask coalitions support at most 64 features");
    let k = bg.k();
    let chunk_len = (32_768 / k.max(1)).max(1);
    let mut values = Vec::with_capacity(masks.len());
    let mut buf = vec![0.0; d];
    for chunk in masks.chunks(chunk_len) {
        let mut rows = Matrix::with_cols(d);
        for &mask in chunk {
            for b in 0..k {
                let bg_row = bg.rows.row(b);
                for j in 0..d {
                    buf[j] = if mask & (1 << j) != 0 { x[j] } else { bg_row[j] };
                }
                rows.push_row(&buf);
            }
        }
        let preds = model.predict(&rows);
        for (ci, _) in chunk.iter().enumerate() {
            let mut v = 0.0;
            for (b, w) in bg.weights.iter().enumerate() {
                v += w * preds[ci * k + b];
            }
            values.push(v);
        }
    }
    values
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoalitionSpec {
    /// Exhaustive when feasible, otherwise `2 * D + 2048` sampled coalitions.
    Auto,
    Exhaustive,
    Sampled(usize),
}

pub const MAX_EXHAUSTIVE_FEATURES: usize = 13;

fn auto_budget(d: usize) -> usize {
    2 * d + 2048
}

/// Kernel SHAP attributions for one instance.
pub fn kernel_shap<P: Predictor>(
    model: &P,
    x: &[f64],
    bg: &Background,
    coalitions: CoalitionSpec,
    seed: u64,
) -> Result<ShapResult, ShapError> {
    let d = x.len();
    if d == 0 {
        return Err(ShapError::NoFeatures);
    }
    let endpoints = masked_values(model, x, bg, &[0, mask_full(d)]);
    let (base, fx) = (endpoints[0], endpoints[1]);
    if d == 1 {
        return Ok(ShapResult {
            phi: vec![fx - base],
            base_value: base,
            fx,
        });
    }

    let exhaustive = match coalitions {
        CoalitionSpec::Exhaustive => {
            if d > MAX_EXHAUSTIVE_FEATURES {
                return Err(ShapError::TooManyFeatures {
                    got: d,
                    max: MAX_EXHAUSTIVE_FEATURES,
                });
            }
            true
        }
        CoalitionSpec::Auto => d <= MAX_EXHAUSTIVE_FEATURES && (1usize << d) <= auto_budget(d),
        CoalitionSpec::Sampled(_) => false,
    };

    let (masks, wls_weights) = if exhaustive {
        let mut masks = Vec::with_capacity((1usize << d) - 2);
        let mut weights = Vec::with_capacity(masks.capacity());
        for mask in 1..mask_full(d) {
            masks.push(mask);
            weights.push(coalition_weight(d, mask.count_ones() as usize)?);
        }
        (masks, weights)
    } else {
        let budget = match coalitions {
            CoalitionSpec::Sampled(n) => n.max(2),
            _ => auto_budget(d),
        };
        (sample_coalitions(d, budget, seed), Vec::new())
    };

    let v = masked_values(model, x, bg, &masks);
    solve_constrained(d, &masks, &v, &wls_weights, base, fx)
}

fn mask_full(d: usize) -> u64 {
    if d == 64 {
        u64::MAX
    } else {
        (1u64 << d) - 1
    }
}

/// Paired sampling: coalition sizes drawn proportional to the total kernel
/// mass per size, subsets uniform within a size, and every draw accompanied
/// by its complement. Sampled rows enter the least squares with unit
/// weight because the kernel is absorbed into the sampling distribution.
fn sample_coalitions(d: usize, budget: usize, seed: u64) -> Vec<u64> {
    let mut rng = Rng::new(seed);
    let size_mass: Vec<f64> = (1..d)
        .map(|s| (d as f64 - 1.0) / (s as f64 * (d - s) as f64))
        .collect();
    let pairs = budget.div_ceil(2);
    let mut masks = Vec::with_capacity(pairs * 2);
    let mut indices: Vec<usize> = (0..d).collect();
    for _ in 0..pairs {
        let s = 1 + rng.pick_weighted(&size_mass);
        rng.shuffle(&mut indices);
        let mut mask = 0u64;
        for &j in indices.iter().take(s) {
            mask |= 1 << j;
        }
        masks.push(mask);
        masks.push(!mask & mask_full(d));
    }
    masks
}

/// Weighted least squares for phi with the empty/full-coalition constraints
/// eliminated: the last feature's attribution is the remainder
/// (fx - base) - sum(others), which enforces local accuracy exactly.
fn solve_constrained(
    d: usize,
    masks: &[u64],
    v: &[f64],
    wls_weights: &[f64],
    base: f64,
    fx: f64,
) -> Result<ShapResult, ShapError> {
    let unknowns = d - 1;
    let last_bit = 1u64 << (d - 1);
    let span = fx - base;
    let mut g = vec![0.0; unknowns * unknowns];
    let mut r = vec![0.0; unknowns];
    let mut a = vec![0.0; unknowns];
    for (i, &mask) in masks.iter().enumerate() {
        let w = wls_weights.get(i).copied().unwrap_or(1.0);
        let z_last = f64::from(mask & last_bit != 0);
        for (j, aj) in a.iter_mut().enumerate() {
            *aj = f64::from(mask & (1 << j) != 0) - z_last;
        }
        let t = v[i] - base - z_last * span;
        for p in 0..unknowns {
            if a[p] == 0.0 {
                continue;
            }
            let wap = w * a[p];
            for q in p..unknowns {
                g[p * unknowns + q] += wap * a[q];
            }
            r[p] += wap * t;
        }
    }
    for p in 0..unknowns {
        for q in 0..p {
            g[p * unknowns + q] = g[q * unknowns + p];
        }
    }

    let solution = match cholesky_solve(&g, &r, unknowns) {
        Some(s) => s,
        None => {
            // one jittered retry before giving up
            for p in 0..unknowns {
                g[p * unknowns + p] += 1e-10;
            }
            cholesky_solve(&g, &r, unknowns).ok_or(ShapError::SingularSystem)?
        }
    };
    let mut phi = solution;
    let allocated: f64 = phi.iter().sum();
    phi.push(span - allocated);
    Ok(ShapResult {
        phi,
        base_value: base,
        fx,
    })
}
