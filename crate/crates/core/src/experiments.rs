//! Batch experiments wired into the CLI: the small-vs-large explanation
//! consistency check and the background-summarization speed/agreement
//! comparison.

use crate::model::Predictor;
use crate::shap::{shap_matrix, Background, ShapConfig, ShapError, ShapMatrix};
use crate::util::matrix::Matrix;
use crate::util::rng::Rng;
use serde::{Deserialize, Serialize};

/// Top-n feature names by mean |phi|, ties broken by feature index.
pub fn top_features(sm: &ShapMatrix, n: usize) -> Vec<String> {
    let means = sm.mean_abs_phi();
    let mut order: Vec<usize> = (0..means.len()).collect();
    order.sort_by(|&a, &b| means[b].partial_cmp(&means[a]).unwrap().then(a.cmp(&b)));
    order
        .into_iter()
        .take(n)
        .map(|j| sm.feature_names[j].clone())
        .collect()
}

pub fn jaccard(a: &[String], b: &[String]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let inter = a.iter().filter(|f| b.contains(f)).count();
    inter as f64 / (a.len() + b.len() - inter) as f64
}

/// Seeded row subsample (the first `n` of a shuffled index order).
pub fn subsample_rows(x: &Matrix, n: usize, seed: u64) -> Matrix {
    let mut rng = Rng::new(seed);
    let mut idx = rng.sample_indices(x.n_rows(), n.min(x.n_rows()));
    idx.sort_unstable();
    x.select_rows(&idx)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub rows_small: usize,
    pub rows_large: usize,
    pub top_n: usize,
    pub jaccard: f64,
    pub top_small: Vec<String>,
    pub top_large: Vec<String>,
    pub seconds_small: f64,
    pub seconds_large: f64,
}

/// Explain a small and a large nested subsample of the same data and
/// compare their top-n mean-|phi| feature sets.
pub fn consistency_experiment<P: Predictor + Sync>(
    model: &P,
    x: &Matrix,
    feature_names: &[String],
    bg: &Background,
    small: usize,
    large: usize,
    top_n: usize,
    cfg: &ShapConfig,
) -> Result<ConsistencyReport, ShapError> {
    let large_batch = subsample_rows(x, large, cfg.seed);
    let small_batch = large_batch.select_rows(&(0..small.min(large_batch.n_rows())).collect::<Vec<_>>());

    let t0 = std::time::Instant::now();
    let sm_small = shap_matrix(model, &small_batch, bg, feature_names, cfg)?;
    let seconds_small = t0.elapsed().as_secs_f64();
    let t1 = std::time::Instant::now();
    let sm_large = shap_matrix(model, &large_batch, bg, feature_names, cfg)?;
    let seconds_large = t1.elapsed().as_secs_f64();

    let top_small = top_features(&sm_small, top_n);
    let top_large = top_features(&sm_large, top_n);
    Ok(ConsistencyReport {
        rows_small: small_batch.n_rows(),
        rows_large: large_batch.n_rows(),
        top_n,
        jaccard: jaccard(&top_small, &top_large),
        top_small,
        top_large,
        seconds_small,
        seconds_large,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FnModel;
    use crate::util::rng::Rng;

    #[test]
    fn jaccard_basic() {
        let a: Vec<String> = ["x", "y", "z"].iter().map(|s| s.to_string()).collect();
        let b: Vec<String> = ["y", "z", "w"].iter().map(|s| s.to_string()).collect();
        assert!((jaccard(&a, &b) - 0.5).abs() < 1e-12);
        assert!((jaccard(&a, &a) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn consistency_on_stable_model() {
        let d = 6;
        let model = FnModel::new(d, |r: &[f64]| {
            crate::util::stats::sigmoid(r.iter().enumerate().map(|(j, v)| v * (j + 1) as f64 / 6.0).sum())
        });
        let mut rng = Rng::new(3);
        let rows: Vec<Vec<f64>> = (0..300)
            .map(|_| (0..d).map(|_| rng.normal()).collect())
            .collect();
        let x = Matrix::from_rows(&rows);
        let names: Vec<String> = (0..d).map(|j| format!("f{j}")).collect();
        let bg = Background::sample(&x, 10, 1);
        let report = consistency_experiment(
            &model,
            &x,
            &names,
            &bg,
            20,
            80,
            3,
            &ShapConfig::default(),
        )
        .unwrap();
        assert_eq!(report.rows_small, 20);
        assert_eq!(report.rows_large, 80);
        // a clean monotone model ranks identically at both sizes
        assert!(report.jaccard >= 0.5, "jaccard {}", report.jaccard);
    }
}
