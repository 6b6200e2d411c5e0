//! Five trainable binary classifiers behind one probability contract, plus
//! evaluation metrics and tree-based information-gain importances. Models
//! are immutable once trained and serialize to a versioned JSON document.

mod boosted;
mod forest;
pub mod logistic;
pub mod metrics;
mod mlp;
mod svm;
pub mod tree;

pub use boosted::{train_boosted, BoostedModel, BoostedParams};
pub use forest::{train_forest, ForestModel, ForestParams};
pub use logistic::{train_logistic, LogisticModel, LogisticParams};
pub use metrics::{evaluate_scores, Metrics};
pub use mlp::{train_mlp, MlpModel, MlpParams};
pub use svm::{train_svm_linear, ProbMethod, SvmModel, SvmParams};

use crate::util::matrix::Matrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("non-finite loss during {0}; check feature scaling")]
    NonFinite(&'static str),
    #[error("input has {got} features but the model expects {expected}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("operation requires an SVM model, got {0}")]
    NotAnSvm(&'static str),
    #[error("operation requires a tree-based model, got {0}")]
    NotTreeBased(&'static str),
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("unsupported model document version {0}")]
    UnsupportedVersion(u32),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Rows in, class-1 probabilities out. The single contract every explainer
/// consumes; also implemented by test oracles over plain functions.
pub trait Predictor {
    fn n_features(&self) -> usize;
    fn predict(&self, x: &Matrix) -> Vec<f64>;
}

/// Adapter turning a row function into a `Predictor`, for oracles and
/// synthetic models in tests.
pub struct FnModel<F: Fn(&[f64]) -> f64 + Sync> {
    n_features: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> f64 + Sync> FnModel<F> {
    pub fn new(n_features: usize, f: F) -> Self {
        FnModel { n_features, f }
    }
}

impl<F: Fn(&[f64]) -> f64 + Sync> Predictor for FnModel<F> {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict(&self, x: &Matrix) -> Vec<f64> {
        assert_eq!(x.n_cols(), self.n_features);
        x.rows().map(|r| (self.f)(r)).collect()
    }
}

/// Per-column standardization constants learned at training time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &Matrix) -> Self {
        let d = x.n_cols();
        let n = x.n_rows().max(1) as f64;
        let mut mean = vec![0.0; d];
        for row in x.rows() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        let mut sd = vec![0.0; d];
        for row in x.rows() {
            for j in 0..d {
                let dlt = row[j] - mean[j];
                sd[j] += dlt * dlt;
            }
        }
        for s in &mut sd {
            *s = (*s / n).sqrt();
            if *s == 0.0 {
                *s = 1.0;
            }
        }
        Standardizer { mean, sd }
    }

    pub fn apply_row(&self, row: &[f64], out: &mut [f64]) {
        for j in 0..row.len() {
            out[j] = (row[j] - self.mean[j]) / self.sd[j];
        }
    }

    pub fn apply(&self, x: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(x.n_rows(), x.n_cols());
        for i in 0..x.n_rows() {
            let row = x.row(i).to_vec();
            self.apply_row(&row, out.row_mut(i));
        }
        out
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelKind {
    Logistic(LogisticModel),
    Forest(ForestModel),
    Boosted(BoostedModel),
    SvmLinear(SvmModel),
    Mlp(MlpModel),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProbabilityModel {
    pub feature_names: Vec<String>,
    #[serde(flatten)]
    pub kind: ModelKind,
}

const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelDocument {
    format_version: u32,
    model: ProbabilityModel,
}

impl ProbabilityModel {
    pub fn new(feature_names: Vec<String>, kind: ModelKind) -> Self {
        ProbabilityModel {
            feature_names,
            kind,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match &self.kind {
            ModelKind::Logistic(_) => "logistic",
            ModelKind::Forest(_) => "forest",
            ModelKind::Boosted(_) => "boosted",
            ModelKind::SvmLinear(_) => "svm",
            ModelKind::Mlp(_) => "mlp",
        }
    }

    pub fn n_features(&self) -> usize {
        match &self.kind {
            ModelKind::Logistic(m) => m.n_features(),
            ModelKind::Forest(m) => m.n_features(),
            ModelKind::Boosted(m) => m.n_features(),
            ModelKind::SvmLinear(m) => m.n_features(),
            ModelKind::Mlp(m) => m.n_features(),
        }
    }

    /// Class-1 probabilities for each row, all in [0, 1].
    pub fn predict_proba(&self, x: &Matrix) -> Result<Vec<f64>, ModelError> {
        if x.n_cols() != self.n_features() {
            return Err(ModelError::ShapeMismatch {
                expected: self.n_features(),
                got: x.n_cols(),
            });
        }
        Ok(match &self.kind {
            ModelKind::Logistic(m) => m.predict(x),
            ModelKind::Forest(m) => m.predict(x),
            ModelKind::Boosted(m) => m.predict(x),
            ModelKind::SvmLinear(m) => m.predict(x),
            ModelKind::Mlp(m) => m.predict(x),
        })
    }

    /// Raw SVM decision values mapped to probabilities by the requested
    /// method. Errors for non-SVM models.
    pub fn svm_probability_map(
        &self,
        x: &Matrix,
        method: ProbMethod,
    ) -> Result<Vec<f64>, ModelError> {
        match &self.kind {
            ModelKind::SvmLinear(m) => {
                if x.n_cols() != m.n_features() {
                    return Err(ModelError::ShapeMismatch {
                        expected: m.n_features(),
                        got: x.n_cols(),
                    });
                }
                Ok(m.probabilities(x, method))
            }
            _ => Err(ModelError::NotAnSvm(self.kind_name())),
        }
    }

    /// Per-feature sum of split gains over all trees, normalized to sum 1
    /// and sorted descending. Errors for non-tree models.
    pub fn information_gain_importance(&self) -> Result<Vec<(String, f64)>, ModelError> {
        let gains = match &self.kind {
            ModelKind::Forest(m) => m.feature_gains(),
            ModelKind::Boosted(m) => m.feature_gains(),
            _ => return Err(ModelError::NotTreeBased(self.kind_name())),
        };
        let total: f64 = gains.iter().sum();
        let mut scored: Vec<(String, f64)> = self
            .feature_names
            .iter()
            .cloned()
            .zip(gains.into_iter().map(|g| if total > 0.0 { g / total } else { 0.0 }))
            .collect();
        scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        Ok(scored)
    }

    pub fn evaluate(&self, x: &Matrix, y: &[u8], threshold: f64) -> Result<Metrics, ModelError> {
        let probs = self.predict_proba(x)?;
        Ok(evaluate_scores(&probs, y, threshold))
    }

    pub fn to_json(&self) -> Result<String, ModelError> {
        Ok(serde_json::to_string_pretty(&ModelDocument {
            format_version: MODEL_FORMAT_VERSION,
            model: self.clone(),
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let doc: ModelDocument = serde_json::from_str(text)?;
        if doc.format_version != MODEL_FORMAT_VERSION {
            return Err(ModelError::UnsupportedVersion(doc.format_version));
        }
        Ok(doc.model)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), ModelError> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ModelError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

impl Predictor for ProbabilityModel {
    fn n_features(&self) -> usize {
        self.n_features()
    }

    fn predict(&self, x: &Matrix) -> Vec<f64> {
        self.predict_proba(x).expect("feature width mismatch")
    }
}
