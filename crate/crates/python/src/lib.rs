//! Python bindings: synthetic data generation, the preprocessing pipeline,
//! the five classifiers, and the three explainers. Complex results come
//! back as JSON strings with the same schemas the CLI writes.

use creditlens::dataset::{
    generate_synthetic, load_csv_str, preprocess, to_csv_string, train_test_split, EncodedMatrix,
    PrepConfig, Schema, SplitSpec, SynthCoefficients, SynthConfig,
};
use creditlens::experiments::subsample_rows;
use creditlens::lime::{explain_instance, Discretizer, DiscretizerKind, KernelWidth, LimeConfig};
use creditlens::model::{
    train_boosted, train_forest, train_logistic, train_mlp, train_svm_linear, BoostedParams,
    ForestParams, LogisticParams, MlpParams, ModelKind, ProbabilityModel, SvmParams,
};
use creditlens::shap::{
    exact_shapley, kernel_shap, shap_matrix, summarize_background, Background, CoalitionSpec,
    ShapConfig,
};
use creditlens::Matrix;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn runtime_err<E: std::fmt::Display>(e: E) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn value_err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn matrix_from_rows(rows: Vec<Vec<f64>>) -> PyResult<Matrix> {
    if rows.is_empty() {
        return Err(PyValueError::new_err("need at least one row"));
    }
    let width = rows[0].len();
    if rows.iter().any(|r| r.len() != width) {
        return Err(PyValueError::new_err("ragged rows"));
    }
    Ok(Matrix::from_rows(&rows))
}

/// Generate a synthetic loan table; returns (csv_text, truth_json,
/// schema_json).
#[pyfunction]
#[pyo3(signature = (rows, seed, recoveries_dominant = false))]
fn synth(rows: usize, seed: u64, recoveries_dominant: bool) -> PyResult<(String, String, String)> {
    if rows < 100 {
        return Err(PyValueError::new_err("rows must be at least 100"));
    }
    let coefficients = if recoveries_dominant {
        SynthCoefficients::recoveries_dominant()
    } else {
        SynthCoefficients::default()
    };
    let (data, truth) = generate_synthetic(&SynthConfig {
        rows,
        seed,
        coefficients,
    });
    Ok((
        to_csv_string(&data).map_err(runtime_err)?,
        serde_json::to_string(&truth).map_err(runtime_err)?,
        serde_json::to_string(&creditlens::dataset::synthetic_schema()).map_err(runtime_err)?,
    ))
}

/// An encoded train/test pair produced by the preprocessing pipeline.
#[pyclass]
struct Prepared {
    train: EncodedMatrix,
    test: EncodedMatrix,
    report_json: String,
}

#[pymethods]
impl Prepared {
    #[getter]
    fn feature_names(&self) -> Vec<String> {
        self.train.names.clone()
    }

    #[getter]
    fn n_features(&self) -> usize {
        self.train.n_features()
    }

    #[getter]
    fn train_rows(&self) -> usize {
        self.train.n_rows()
    }

    #[getter]
    fn test_rows(&self) -> usize {
        self.test.n_rows()
    }

    #[getter]
    fn report_json(&self) -> String {
        self.report_json.clone()
    }

    fn test_row(&self, i: usize) -> PyResult<Vec<f64>> {
        if i >= self.test.n_rows() {
            return Err(PyValueError::new_err("row index out of range"));
        }
        Ok(self.test.x.row(i).to_vec())
    }

    fn test_label(&self, i: usize) -> PyResult<u8> {
        self.test
            .y
            .get(i)
            .copied()
            .ok_or_else(|| PyValueError::new_err("row index out of range"))
    }
}

/// Run the preprocessing pipeline over CSV text and split train/test.
#[pyfunction]
#[pyo3(signature = (csv_text, schema_json, test_fraction = 0.2, seed = 42, sparse_threshold = 0.9, corr_max = 0.9, alpha = 0.05, grade_column = "grade"))]
#[allow(clippy::too_many_arguments)]
fn prepare(
    csv_text: &str,
    schema_json: &str,
    test_fraction: f64,
    seed: u64,
    sparse_threshold: f64,
    corr_max: f64,
    alpha: f64,
    grade_column: &str,
) -> PyResult<Prepared> {
    let schema = Schema::from_json(schema_json).map_err(value_err)?;
    let data = load_csv_str(csv_text, &schema).map_err(value_err)?;
    let cfg = PrepConfig {
        sparse_threshold,
        corr_max,
        chi_alpha: alpha,
        grade_column: grade_column.to_string(),
    };
    let (encoded, report) = preprocess(data, &cfg).map_err(runtime_err)?;
    let (train, test) = train_test_split(
        &encoded,
        &SplitSpec {
            test_fraction,
            seed,
        },
    )
    .map_err(runtime_err)?;
    Ok(Prepared {
        train,
        test,
        report_json: serde_json::to_string(&report).map_err(runtime_err)?,
    })
}

/// A trained classifier behind the shared probability contract.
#[pyclass]
struct Model {
    inner: ProbabilityModel,
}

#[pymethods]
impl Model {
    /// Train on the prepared training split. Hyperparameters default to
    /// desk-scale values; pass overrides as needed.
    #[staticmethod]
    #[pyo3(signature = (prepared, kind, seed = 42, trees = None, depth = None, rounds = None, learning_rate = None, epochs = None, l2 = None, cost = None))]
    #[allow(clippy::too_many_arguments)]
    fn train(
        prepared: &Prepared,
        kind: &str,
        seed: u64,
        trees: Option<usize>,
        depth: Option<usize>,
        rounds: Option<usize>,
        learning_rate: Option<f64>,
        epochs: Option<usize>,
        l2: Option<f64>,
        cost: Option<f64>,
    ) -> PyResult<Model> {
        let x = &prepared.train.x;
        let y = &prepared.train.y;
        let model_kind = match kind {
            "logistic" => ModelKind::Logistic(
                train_logistic(
                    x,
                    y,
                    &LogisticParams {
                        l2: l2.unwrap_or(1.0),
                        ..Default::default()
                    },
                )
                .map_err(runtime_err)?,
            ),
            "forest" => ModelKind::Forest(
                train_forest(
                    x,
                    y,
                    &ForestParams {
                        n_trees: trees.unwrap_or(60),
                        max_depth: depth.unwrap_or(10),
                        bootstrap: true,
                        seed,
                    },
                )
                .map_err(runtime_err)?,
            ),
            "boosted" => ModelKind::Boosted(
                train_boosted(
                    x,
                    y,
                    &BoostedParams {
                        n_rounds: rounds.unwrap_or(100),
                        max_depth: depth.unwrap_or(4),
                        learning_rate: learning_rate.unwrap_or(0.1),
                        seed,
                    },
                )
                .map_err(runtime_err)?,
            ),
            "svm" => ModelKind::SvmLinear(
                train_svm_linear(
                    x,
                    y,
                    &SvmParams {
                        c: cost.unwrap_or(1.0),
                        seed,
                        ..Default::default()
                    },
                )
                .map_err(runtime_err)?,
            ),
            "mlp" => ModelKind::Mlp(
                train_mlp(
                    x,
                    y,
                    &MlpParams {
                        epochs: epochs.unwrap_or(20),
                        learning_rate: learning_rate.unwrap_or(1e-3),
                        seed,
                        ..Default::default()
                    },
                )
                .map_err(runtime_err)?,
            ),
            other => {
                return Err(PyValueError::new_err(format!(
                    "unknown kind `{other}` (expected logistic|forest|boosted|svm|mlp)"
                )))
            }
        };
        Ok(Model {
            inner: ProbabilityModel::new(prepared.train.names.clone(), model_kind),
        })
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.inner.kind_name()
    }

    #[getter]
    fn n_features(&self) -> usize {
        self.inner.n_features()
    }

    /// Class-1 probabilities for a batch of rows.
    fn predict_proba(&self, rows: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        let x = matrix_from_rows(rows)?;
        self.inner.predict_proba(&x).map_err(value_err)
    }

    /// Metrics JSON against the prepared test split.
    #[pyo3(signature = (prepared, threshold = 0.5))]
    fn evaluate_json(&self, prepared: &Prepared, threshold: f64) -> PyResult<String> {
        let metrics = self
            .inner
            .evaluate(&prepared.test.x, &prepared.test.y, threshold)
            .map_err(runtime_err)?;
        serde_json::to_string(&metrics).map_err(runtime_err)
    }

    /// Normalized information-gain importances (tree models only).
    fn information_gain_json(&self) -> PyResult<String> {
        let gain = self.inner.information_gain_importance().map_err(value_err)?;
        serde_json::to_string(&gain).map_err(runtime_err)
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(runtime_err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Model> {
        Ok(Model {
            inner: ProbabilityModel::from_json(text).map_err(value_err)?,
        })
    }
}

/// LIME explanation JSON for one test-split instance.
#[pyfunction]
#[pyo3(signature = (model, prepared, instance, top_k = 10, samples = 5000, seed = 42, discretizer = "quartile"))]
fn lime_explain(
    model: &Model,
    prepared: &Prepared,
    instance: usize,
    top_k: usize,
    samples: usize,
    seed: u64,
    discretizer: &str,
) -> PyResult<String> {
    let kind = match discretizer {
        "quartile" => DiscretizerKind::Quartile,
        "none" => DiscretizerKind::None,
        other => return Err(PyValueError::new_err(format!("bad discretizer `{other}`"))),
    };
    let disc = match kind {
        DiscretizerKind::Quartile => Discretizer::fit_quartile(&prepared.train.x),
        DiscretizerKind::None => Discretizer::fit_raw(&prepared.train.x),
    };
    if instance >= prepared.test.n_rows() {
        return Err(PyValueError::new_err("instance out of range"));
    }
    let cfg = LimeConfig {
        n_samples: samples,
        top_k,
        kernel_width: KernelWidth::Auto,
        discretizer: kind,
        ridge_penalty: 1.0,
        seed,
    };
    let x = prepared.test.x.row(instance).to_vec();
    let explanation = explain_instance(
        &model.inner,
        &x,
        instance,
        &prepared.test.names,
        &disc,
        &cfg,
    )
    .map_err(runtime_err)?;
    serde_json::to_string(&explanation).map_err(runtime_err)
}

/// Kernel SHAP matrix JSON over a subsample of the test split, using a
/// k-means background summarized from the training split.
#[pyfunction]
#[pyo3(signature = (model, prepared, rows = 50, background_k = 30, background_source = 20000, seed = 42))]
fn shap_explain(
    model: &Model,
    prepared: &Prepared,
    rows: usize,
    background_k: usize,
    background_source: usize,
    seed: u64,
) -> PyResult<String> {
    let bg = summarize_background(&prepared.train.x, background_k, background_source, seed)
        .map_err(runtime_err)?;
    let batch = subsample_rows(&prepared.test.x, rows, seed);
    let sm = shap_matrix(
        &model.inner,
        &batch,
        &bg,
        &prepared.train.names,
        &ShapConfig {
            seed,
            ..Default::default()
        },
    )
    .map_err(runtime_err)?;
    serde_json::to_string(&sm).map_err(runtime_err)
}

/// Kernel SHAP for a single row against explicit background rows.
#[pyfunction]
#[pyo3(signature = (model, row, background_rows, coalitions = "auto", seed = 42))]
fn kernel_shap_row(
    model: &Model,
    row: Vec<f64>,
    background_rows: Vec<Vec<f64>>,
    coalitions: &str,
    seed: u64,
) -> PyResult<String> {
    let spec = match coalitions {
        "auto" => CoalitionSpec::Auto,
        "exhaustive" => CoalitionSpec::Exhaustive,
        other => CoalitionSpec::Sampled(
            other
                .parse::<usize>()
                .map_err(|_| PyValueError::new_err(format!("bad coalitions `{other}`")))?,
        ),
    };
    let bg = Background::full(&matrix_from_rows(background_rows)?);
    let result = kernel_shap(&model.inner, &row, &bg, spec, seed).map_err(value_err)?;
    serde_json::to_string(&result).map_err(runtime_err)
}

/// Exact enumeration Shapley values (D <= 15) for validation.
#[pyfunction]
fn exact_shapley_row(
    model: &Model,
    row: Vec<f64>,
    background_rows: Vec<Vec<f64>>,
) -> PyResult<String> {
    let bg = Background::full(&matrix_from_rows(background_rows)?);
    let result = exact_shapley(&model.inner, &row, &bg).map_err(value_err)?;
    serde_json::to_string(&result).map_err(runtime_err)
}

/// ALE curve JSON for one encoded feature over the test split.
#[pyfunction]
#[pyo3(signature = (model, prepared, feature, intervals = 20))]
fn ale_curve_json(
    model: &Model,
    prepared: &Prepared,
    feature: &str,
    intervals: usize,
) -> PyResult<String> {
    let j = prepared
        .test
        .feature_index(feature)
        .ok_or_else(|| PyValueError::new_err(format!("unknown feature `{feature}`")))?;
    let curve = creditlens::ale::ale_curve(&model.inner, &prepared.test.x, j, feature, intervals)
        .map_err(runtime_err)?;
    serde_json::to_string(&curve).map_err(runtime_err)
}

#[pymodule]
fn creditlens_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<Prepared>()?;
    m.add_class::<Model>()?;
    m.add_function(wrap_pyfunction!(synth, m)?)?;
    m.add_function(wrap_pyfunction!(prepare, m)?)?;
    m.add_function(wrap_pyfunction!(lime_explain, m)?)?;
    m.add_function(wrap_pyfunction!(shap_explain, m)?)?;
    m.add_function(wrap_pyfunction!(kernel_shap_row, m)?)?;
    m.add_function(wrap_pyfunction!(exact_shapley_row, m)?)?;
    m.add_function(wrap_pyfunction!(ale_curve_json, m)?)?;
    Ok(())
}
