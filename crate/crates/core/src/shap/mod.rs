//! Kernel SHAP with background summarization and an exact enumeration
//! oracle. Produces per-instance attributions and batched matrices for the
//! global views.

mod background;
pub mod exact;
mod kernel;

pub use background::{summarize_background, Background, BackgroundProvenance};
pub use exact::{exact_shapley, MAX_EXACT_FEATURES};
pub use kernel::{
    coalition_weight, kernel_shap, masked_prediction, CoalitionSpec, MAX_EXHAUSTIVE_FEATURES,
};

use crate::model::Predictor;
use crate::util::matrix::Matrix;
use crate::util::rng::derive_seed;
use serde::{Deserialize, Serialize};
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ShapError {
    #[error("coalition size {s} is outside 0 < s < {m}")]
    DomainError { m: usize, s: usize },
    #[error("{got} features exceed the {max}-feature cap for this solver")]
    TooManyFeatures { got: usize, max: usize },
    #[error("cannot explain a zero-feature instance")]
    NoFeatures,
    #[error("constrained least squares stayed singular after jitter")]
    SingularSystem,
    #[error("background must contain at least one row")]
    EmptyBackground,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Attributions for one instance: `base_value + sum(phi) = fx` within
/// solver tolerance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapResult {
    pub phi: Vec<f64>,
    pub base_value: f64,
    pub fx: f64,
}

impl ShapResult {
    pub fn local_accuracy_gap(&self) -> f64 {
        (self.base_value + self.phi.iter().sum::<f64>() - self.fx).abs()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ShapMatrix {
    pub feature_names: Vec<String>,
    pub results: Vec<ShapResult>,
    /// Wall-clock seconds spent on each row. Not serialized: the matrix
    /// artifact stays byte-stable across runs; timings go to the separate
    /// timing log.
    #[serde(skip)]
    pub row_seconds: Vec<f64>,
}

impl ShapMatrix {
    pub fn n_rows(&self) -> usize {
        self.results.len()
    }

    /// Mean |phi| per feature across all explained rows.
    pub fn mean_abs_phi(&self) -> Vec<f64> {
        let d = self.feature_names.len();
        let mut acc = vec![0.0; d];
        for r in &self.results {
            for (a, p) in acc.iter_mut().zip(&r.phi) {
                *a += p.abs();
            }
        }
        let n = self.results.len().max(1) as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        acc
    }

    pub fn save_json(&self, path: &std::path::Path) -> Result<(), ShapError> {
        std::fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn load_json(path: &std::path::Path) -> Result<Self, ShapError> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    /// CSV with one row per instance: feature columns, then base_value, fx.
    pub fn save_csv(&self, path: &std::path::Path) -> Result<(), ShapError> {
        let mut out = String::new();
        for name in &self.feature_names {
            out.push_str(name);
            out.push(',');
        }
        out.push_str("base_value,fx\n");
        for r in &self.results {
            for phi in &r.phi {
                out.push_str(&format!("{phi},"));
            }
            out.push_str(&format!("{},{}\n", r.base_value, r.fx));
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ShapConfig {
    pub coalitions: CoalitionSpec,
    pub seed: u64,
    /// Worker threads for the row fan-out; 1 keeps everything serial.
    pub jobs: usize,
    /// Print progress to stderr every few rows.
    pub progress: bool,
}

impl Default for ShapConfig {
    fn default() -> Self {
        ShapConfig {
            coalitions: CoalitionSpec::Auto,
            seed: 42,
            jobs: 1,
            progress: false,
        }
    }
}

/// Explain every row of `x_explain` with per-row seeds derived from the
/// master seed, so results are identical regardless of `jobs`.
pub fn shap_matrix<P: Predictor + Sync>(
    model: &P,
    x_explain: &Matrix,
    bg: &Background,
    feature_names: &[String],
    cfg: &ShapConfig,
) -> Result<ShapMatrix, ShapError> {
    let n = x_explain.n_rows();
    let explain_row = |i: usize| -> Result<(ShapResult, f64), ShapError> {
        let start = Instant::now();
        let result = kernel_shap(
            model,
            x_explain.row(i),
            bg,
            cfg.coalitions,
            derive_seed(cfg.seed, i as u64),
        )?;
        Ok((result, start.elapsed().as_secs_f64()))
    };

    let mut slots: Vec<Option<Result<(ShapResult, f64), ShapError>>> = Vec::new();
    slots.resize_with(n, || None);
    if cfg.jobs <= 1 {
        let report_every = (n / 20).max(1);
        for (i, slot) in slots.iter_mut().enumerate() {
            *slot = Some(explain_row(i));
            if cfg.progress && (i + 1) % report_every == 0 {
                eprintln!("shap: {}/{n} rows", i + 1);
            }
        }
    } else {
        let jobs = cfg.jobs.min(n.max(1));
        let next = std::sync::atomic::AtomicUsize::new(0);
        let results: Vec<std::sync::Mutex<Option<Result<(ShapResult, f64), ShapError>>>> =
            (0..n).map(|_| std::sync::Mutex::new(None)).collect();
        std::thread::scope(|scope| {
            for _ in 0..jobs {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                    if i >= n {
                        break;
                    }
                    *results[i].lock().unwrap() = Some(explain_row(i));
                });
            }
        });
        for (slot, cell) in slots.iter_mut().zip(results) {
            *slot = cell.into_inner().unwrap();
        }
    }

    let mut matrix = ShapMatrix {
        feature_names: feature_names.to_vec(),
        results: Vec::with_capacity(n),
        row_seconds: Vec::with_capacity(n),
    };
    for slot in slots {
        let (result, seconds) = slot.expect("row explained")?;
        matrix.results.push(result);
        matrix.row_seconds.push(seconds);
    }
    Ok(matrix)
}
