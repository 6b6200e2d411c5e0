//! Exact Shapley values by full subset enumeration, the ground-truth oracle
//! for the kernel solver. Cost is 2^D background-weighted evaluations, so
//! the feature count is capped.

use super::kernel::masked_values;
use super::{Background, ShapError, ShapResult};
use crate::model::Predictor;

pub const MAX_EXACT_FEATURES: usize = 15;

/// phi_j = sum over subsets S not containing j of
/// |S|! (D - |S| - 1)! / D! * [v(S + j) - v(S)], with v the interventional
/// masked prediction. Local accuracy holds by construction.
pub fn exact_shapley<P: Predictor>(
    model: &P,
    x: &[f64],
    bg: &Background,
) -> Result<ShapResult, ShapError> {
    let d = x.len();
    if d == 0 || d > MAX_EXACT_FEATURES {
        return Err(ShapError::TooManyFeatures {
            got: d,
            max: MAX_EXACT_FEATURES,
        });
    }
    let n_masks = 1usize << d;
    let masks: Vec<u64> = (0..n_masks as u64).collect();
    let v = masked_values(model, x, bg, &masks);

    // factorial weights per subset size (exact in f64 for d <= 15)
    let mut factorial = vec![1.0; d + 1];
    for i in 1..=d {
        factorial[i] = factorial[i - 1] * i as f64;
    }
    let weight: Vec<f64> = (0..d)
        .map(|s| factorial[s] * factorial[d - s - 1] / factorial[d])
        .collect();

    let mut phi = vec![0.0; d];
    for mask in 0..n_masks as u64 {
        let s = mask.count_ones() as usize;
        if s >= d {
            continue;
        }
        let w = weight[s];
        for (j, phi_j) in phi.iter_mut().enumerate() {
            if mask & (1 << j) == 0 {
                *phi_j += w * (v[(mask | (1 << j)) as usize] - v[mask as usize]);
            }
        }
    }
    Ok(ShapResult {
        phi,
        base_value: v[0],
        fx: v[n_masks - 1],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FnModel;
    use crate::util::matrix::Matrix;

    fn zeros_background(d: usize) -> Background {
        Background::full(&Matrix::from_rows(&[vec![0.0; d]]))
    }

    #[test]
    fn additive_linear_case() {
        let model = FnModel::new(2, |r: &[f64]| r[0] + 2.0 * r[1]);
        let result = exact_shapley(&model, &[1.0, 1.0], &zeros_background(2)).unwrap();
        assert!((result.phi[0] - 1.0).abs() < 1e-12);
        assert!((result.phi[1] - 2.0).abs() < 1e-12);
        assert!(result.base_value.abs() < 1e-12);
        assert!((result.fx - 3.0).abs() < 1e-12);
    }

    #[test]
    fn interaction_split_equally() {
        let model = FnModel::new(2, |r: &[f64]| r[0] * r[1]);
        let result = exact_shapley(&model, &[1.0, 1.0], &zeros_background(2)).unwrap();
        assert!((result.phi[0] - 0.5).abs() < 1e-12);
        assert!((result.phi[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn dummy_feature_gets_zero() {
        let model = FnModel::new(3, |r: &[f64]| 3.0 * r[0] - r[1]);
        let mut rng = crate::util::rng::Rng::new(2);
        let rows: Vec<Vec<f64>> = (0..5)
            .map(|_| (0..3).map(|_| rng.normal()).collect())
            .collect();
        let bg = Background::full(&Matrix::from_rows(&rows));
        let result = exact_shapley(&model, &[0.3, -0.7, 2.0], &bg).unwrap();
        assert!(result.phi[2].abs() < 1e-12, "phi {:?}", result.phi);
    }

    #[test]
    fn local_accuracy_by_construction() {
        let model = FnModel::new(4, |r: &[f64]| (r[0] * r[1]).sin() + r[2] * r[3] * r[3]);
        let mut rng = crate::util::rng::Rng::new(5);
        let rows: Vec<Vec<f64>> = (0..7)
            .map(|_| (0..4).map(|_| rng.normal()).collect())
            .collect();
        let bg = Background::full(&Matrix::from_rows(&rows));
        let x = [0.4, -1.2, 0.9, 1.1];
        let result = exact_shapley(&model, &x, &bg).unwrap();
        let total: f64 = result.base_value + result.phi.iter().sum::<f64>();
        assert!((total - result.fx).abs() < 1e-12);
    }

    #[test]
    fn too_many_features_rejected() {
        let model = FnModel::new(16, |_: &[f64]| 0.0);
        let x = vec![0.0; 16];
        assert!(matches!(
            exact_shapley(&model, &x, &zeros_background(16)),
            Err(ShapError::TooManyFeatures { .. })
        ));
    }
}
