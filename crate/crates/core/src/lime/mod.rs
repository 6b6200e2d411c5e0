//! Tabular LIME: perturb around an instance, weight samples by proximity,
//! fit a sparse interpretable surrogate, and report the top-k signed
//! feature conditions.

mod discretizer;
mod surrogate;

pub use discretizer::{BinStat, Discretizer, FeatureBins};
pub use surrogate::{fit_surrogate, penalized_objective, SurrogateFit};

use crate::model::Predictor;
use crate::util::matrix::Matrix;
use crate::util::rng::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LimeError {
    #[error("surrogate system stayed singular after ridge escalation")]
    SingularSystem,
    #[error("instance has {got} features but the discretizer covers {expected}")]
    ShapeMismatch { expected: usize, got: usize },
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelWidth {
    /// 0.75 * sqrt(D)
    Auto,
    Fixed(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscretizerKind {
    Quartile,
    None,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LimeConfig {
    pub n_samples: usize,
    pub top_k: usize,
    pub kernel_width: KernelWidth,
    pub discretizer: DiscretizerKind,
    pub ridge_penalty: f64,
    pub seed: u64,
}

impl Default for LimeConfig {
    fn default() -> Self {
        LimeConfig {
            n_samples: 5000,
            top_k: 10,
            kernel_width: KernelWidth::Auto,
            discretizer: DiscretizerKind::Quartile,
            ridge_penalty: 1.0,
            seed: 42,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExplanationEntry {
    /// Readable threshold condition, e.g. `total_pymnt > 13550.68`.
    pub condition: String,
    pub feature: String,
    pub feature_index: usize,
    /// Positive pushes toward class 1 ("Default"), negative toward class 0.
    pub weight: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LocalExplanation {
    pub instance_id: usize,
    pub predicted_class: u8,
    pub class_probabilities: [f64; 2],
    pub intercept: f64,
    pub r2: f64,
    pub entries: Vec<ExplanationEntry>,
    /// Surrogate contribution of the selected features at the instance.
    pub top_k_contribution: f64,
    /// Same tally over the full first-stage ridge fit; the two can disagree
    /// in sign, which is worth inspecting.
    pub full_contribution: f64,
}

/// Draw `cfg.n_samples` perturbations around `x`. Row 0 is the instance
/// itself. Returns the interpretable representation and the raw feature
/// rows to feed the model.
pub fn sample_perturbations(
    x: &[f64],
    disc: &Discretizer,
    cfg: &LimeConfig,
) -> (Matrix, Matrix) {
    let mut rng = Rng::new(cfg.seed);
    let d = disc.n_features();
    assert_eq!(x.len(), d, "instance width must match the discretizer");
    let n = cfg.n_samples.max(1);
    let mut z_interp = Matrix::zeros(n, d);
    let mut z_raw = Matrix::zeros(n, d);

    match disc {
        Discretizer::Quartile { features } => {
            let instance_bins: Vec<usize> =
                features.iter().zip(x).map(|(f, &v)| f.bin_of(v)).collect();
            for j in 0..d {
                z_interp.set(0, j, 1.0);
                z_raw.set(0, j, x[j]);
            }
            for i in 1..n {
                for (j, bins) in features.iter().enumerate() {
                    let (value, bin) = sample_feature(bins, &mut rng);
                    z_raw.set(i, j, value);
                    z_interp.set(i, j, f64::from(bin == instance_bins[j]));
                }
            }
        }
        Discretizer::Raw { mean, sd } => {
            // Gaussian perturbations centered on the instance, scaled by the
            // training spread; the interpretable value is the z-score.
            for j in 0..d {
                z_interp.set(0, j, (x[j] - mean[j]) / sd[j]);
                z_raw.set(0, j, x[j]);
            }
            for i in 1..n {
                for j in 0..d {
                    let v = x[j] + sd[j] * rng.normal();
                    z_raw.set(i, j, v);
                    z_interp.set(i, j, (v - mean[j]) / sd[j]);
                }
            }
        }
    }
    (z_interp, z_raw)
}

/// Draw a value for one feature; returns (raw value, bin index).
fn sample_feature(bins: &FeatureBins, rng: &mut Rng) -> (f64, usize) {
    match bins {
        FeatureBins::Constant { value } => (*value, 0),
        FeatureBins::Discrete { values, freqs } => {
            let k = rng.pick_weighted(freqs);
            (values[k], k)
        }
        FeatureBins::Quartile { edges, stats } => {
            let bin = rng.below(4);
            let (lo, hi) = match bin {
                0 => (f64::NEG_INFINITY, edges[0]),
                1 => (edges[0], edges[1]),
                2 => (edges[1], edges[2]),
                _ => (edges[2], f64::INFINITY),
            };
            let BinStat { mean, sd } = stats[bin];
            if sd <= 0.0 {
                return (mean.clamp(lo.max(f64::MIN), hi), bin);
            }
            // truncated normal by rejection, falling back to the nearer bound
            for _ in 0..100 {
                let v = mean + sd * rng.normal();
                let inside = if bin == 0 { v <= hi } else { v > lo && v <= hi };
                if inside {
                    return (v, bin);
                }
            }
            let v = if hi.is_finite() { hi } else { lo + sd };
            (v, bin)
        }
    }
}

/// Exponential proximity kernel over the distance to row 0:
/// w_i = exp(-dist_i^2 / width^2).
pub fn proximity_weights(z_interpretable: &Matrix, cfg: &LimeConfig) -> Vec<f64> {
    let d = z_interpretable.n_cols();
    let width = match cfg.kernel_width {
        KernelWidth::Auto => 0.75 * (d as f64).sqrt(),
        KernelWidth::Fixed(w) => w,
    };
    assert!(width > 0.0, "kernel width must be positive");
    let anchor = z_interpretable.row(0).to_vec();
    z_interpretable
        .rows()
        .map(|row| {
            let dist_sq: f64 = row
                .iter()
                .zip(&anchor)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            (-dist_sq / (width * width)).exp()
        })
        .collect()
}

fn format_value(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

fn condition_text(disc: &Discretizer, j: usize, name: &str, x_j: f64) -> String {
    match disc {
        Discretizer::Raw { .. } => format!("{name} = {}", format_value(x_j)),
        Discretizer::Quartile { features } => match &features[j] {
            FeatureBins::Constant { value } => format!("{name} = {}", format_value(*value)),
            FeatureBins::Discrete { .. } => format!("{name} = {}", format_value(x_j)),
            FeatureBins::Quartile { edges, .. } => {
                match features[j].bin_of(x_j) {
                    0 => format!("{name} <= {}", format_value(edges[0])),
                    1 => format!(
                        "{} < {name} <= {}",
                        format_value(edges[0]),
                        format_value(edges[1])
                    ),
                    2 => format!(
                        "{} < {name} <= {}",
                        format_value(edges[1]),
                        format_value(edges[2])
                    ),
                    _ => format!("{name} > {}", format_value(edges[2])),
                }
            }
        },
    }
}

/// Full LIME pipeline for one instance: sample, predict, weight, fit, and
/// render. Positive weights push toward class 1.
pub fn explain_instance<P: Predictor>(
    model: &P,
    x: &[f64],
    instance_id: usize,
    feature_names: &[String],
    disc: &Discretizer,
    cfg: &LimeConfig,
) -> Result<LocalExplanation, LimeError> {
    if x.len() != disc.n_features() {
        return Err(LimeError::ShapeMismatch {
            expected: disc.n_features(),
            got: x.len(),
        });
    }
    let (z_interp, z_raw) = sample_perturbations(x, disc, cfg);
    let f_probs = model.predict(&z_raw);
    let weights = proximity_weights(&z_interp, cfg);
    let fit = fit_surrogate(&z_interp, &f_probs, &weights, cfg.top_k, cfg.ridge_penalty)?;

    let p1 = f_probs[0];
    let instance_interp = z_interp.row(0);
    let entries: Vec<ExplanationEntry> = fit
        .selected
        .iter()
        .zip(&fit.coefficients)
        .map(|(&j, &weight)| ExplanationEntry {
            condition: condition_text(disc, j, &feature_names[j], x[j]),
            feature: feature_names[j].clone(),
            feature_index: j,
            weight,
        })
        .collect();
    let top_k_contribution: f64 = fit
        .selected
        .iter()
        .zip(&fit.coefficients)
        .map(|(&j, beta)| beta * instance_interp[j])
        .sum();
    let full_contribution: f64 = fit
        .full_coefficients
        .iter()
        .enumerate()
        .map(|(j, beta)| beta * instance_interp[j])
        .sum();

    Ok(LocalExplanation {
        instance_id,
        predicted_class: u8::from(p1 >= 0.5),
        class_probabilities: [1.0 - p1, p1],
        intercept: fit.intercept,
        r2: fit.r2,
        entries,
        top_k_contribution,
        full_contribution,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FnModel;
    use crate::util::stats::sigmoid;

    fn training_ramp(n: usize, d: usize) -> Matrix {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..d).map(|j| (i as f64 + 1.0) * (j as f64 + 1.0)).collect())
            .collect();
        Matrix::from_rows(&rows)
    }

    #[test]
    fn row_zero_is_all_ones() {
        let x_train = training_ramp(100, 3);
        let disc = Discretizer::fit_quartile(&x_train);
        let cfg = LimeConfig {
            n_samples: 50,
            ..Default::default()
        };
        let instance = x_train.row(10).to_vec();
        let (z_interp, z_raw) = sample_perturbations(&instance, &disc, &cfg);
        assert_eq!(z_interp.row(0), &[1.0, 1.0, 1.0]);
        assert_eq!(z_raw.row(0), instance.as_slice());
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let x_train = training_ramp(100, 2);
        let disc = Discretizer::fit_quartile(&x_train);
        let cfg = LimeConfig {
            n_samples: 200,
            seed: 77,
            ..Default::default()
        };
        let instance = x_train.row(5).to_vec();
        let (a_interp, a_raw) = sample_perturbations(&instance, &disc, &cfg);
        let (b_interp, b_raw) = sample_perturbations(&instance, &disc, &cfg);
        assert_eq!(a_interp, b_interp);
        assert_eq!(a_raw, b_raw);
    }

    #[test]
    fn marginal_bin_frequencies_uniform() {
        let x_train = training_ramp(100, 1);
        let disc = Discretizer::fit_quartile(&x_train);
        let cfg = LimeConfig {
            n_samples: 50_000,
            seed: 3,
            ..Default::default()
        };
        let instance = [x_train.get(50, 0)];
        let (_, z_raw) = sample_perturbations(&instance, &disc, &cfg);
        let Discretizer::Quartile { features } = &disc else {
            panic!()
        };
        let mut counts = [0usize; 4];
        for i in 1..z_raw.n_rows() {
            counts[features[0].bin_of(z_raw.get(i, 0))] += 1;
        }
        let n = (cfg.n_samples - 1) as f64;
        for &c in &counts {
            let freq = c as f64 / n;
            assert!((freq - 0.25).abs() < 0.02, "bin frequencies {counts:?}");
        }
    }

    #[test]
    fn proximity_kernel_values() {
        let mut z = Matrix::zeros(3, 4);
        for j in 0..4 {
            z.set(0, j, 1.0);
            z.set(1, j, 1.0);
        }
        // row 2 at distance = width from row 0
        let width = 0.75 * 2.0; // sqrt(4) = 2
        z.set(2, 0, 1.0 - width);
        for j in 1..4 {
            z.set(2, j, 1.0);
        }
        let cfg = LimeConfig::default();
        let w = proximity_weights(&z, &cfg);
        assert!((w[0] - 1.0).abs() < 1e-15);
        assert!((w[1] - 1.0).abs() < 1e-15);
        assert!((w[2] - (-1.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn weights_non_increasing_in_distance() {
        let mut z = Matrix::zeros(6, 5);
        for j in 0..5 {
            z.set(0, j, 1.0);
        }
        for i in 1..6 {
            for j in 0..5 {
                z.set(i, j, f64::from(j >= i - 1));
            }
        }
        let w = proximity_weights(&z, &LimeConfig::default());
        for pair in w.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-15);
        }
    }

    #[test]
    fn explanation_has_top_k_entries_and_is_deterministic() {
        let mut rng = Rng::new(9);
        let rows: Vec<Vec<f64>> = (0..400)
            .map(|_| (0..12).map(|_| rng.normal() * 2.0 + 1.0).collect())
            .collect();
        let x_train = Matrix::from_rows(&rows);
        let disc = Discretizer::fit_quartile(&x_train);
        let model = FnModel::new(12, |r: &[f64]| {
            sigmoid(r.iter().enumerate().map(|(j, v)| v * (j as f64 - 5.0) / 10.0).sum())
        });
        let names: Vec<String> = (0..12).map(|j| format!("f{j}")).collect();
        let cfg = LimeConfig {
            n_samples: 1500,
            seed: 21,
            ..Default::default()
        };
        let instance = x_train.row(7).to_vec();
        let a = explain_instance(&model, &instance, 7, &names, &disc, &cfg).unwrap();
        let b = explain_instance(&model, &instance, 7, &names, &disc, &cfg).unwrap();
        assert_eq!(a.entries.len(), 10);
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        // entries sorted by |weight| descending
        for pair in a.entries.windows(2) {
            assert!(pair[0].weight.abs() >= pair[1].weight.abs() - 1e-15);
        }
    }

    #[test]
    fn linear_model_signs_recovered_without_discretizer() {
        let mut rng = Rng::new(15);
        let d = 10;
        let rows: Vec<Vec<f64>> = (0..500)
            .map(|_| (0..d).map(|_| rng.normal()).collect())
            .collect();
        let x_train = Matrix::from_rows(&rows);
        let disc = Discretizer::fit_raw(&x_train);
        let gen: Vec<f64> = (0..d)
            .map(|j| if j % 2 == 0 { 0.08 + 0.015 * j as f64 } else { -0.08 - 0.015 * j as f64 })
            .collect();
        let gen_for_model = gen.clone();
        let model = FnModel::new(d, move |r: &[f64]| {
            sigmoid(r.iter().zip(&gen_for_model).map(|(v, c)| v * c).sum())
        });
        let names: Vec<String> = (0..d).map(|j| format!("f{j}")).collect();
        let cfg = LimeConfig {
            n_samples: 4000,
            discretizer: DiscretizerKind::None,
            seed: 2,
            ..Default::default()
        };
        let instance = x_train.row(3).to_vec();
        let ex = explain_instance(&model, &instance, 3, &names, &disc, &cfg).unwrap();
        assert!(ex.r2 > 0.95, "r2 {}", ex.r2);
        for entry in &ex.entries {
            assert_eq!(
                entry.weight.signum(),
                gen[entry.feature_index].signum(),
                "feature {}",
                entry.feature
            );
        }
    }

    #[test]
    fn narrower_kernel_does_not_hurt_fit() {
        // locality: the weighted fit can only get better (in median over
        // seeds) as the kernel concentrates on the neighborhood
        let d = 3;
        let model = FnModel::new(d, |r: &[f64]| {
            sigmoid(r.iter().sum::<f64>() / 2.0 + (r[0] * r[1]) / 4.0)
        });
        let mut rng = Rng::new(61);
        let rows: Vec<Vec<f64>> = (0..300)
            .map(|_| (0..d).map(|_| rng.normal()).collect())
            .collect();
        let x_train = Matrix::from_rows(&rows);
        let disc = Discretizer::fit_raw(&x_train);
        let names: Vec<String> = (0..d).map(|j| format!("f{j}")).collect();
        let instance = x_train.row(0).to_vec();
        let wide_width = 0.75 * (d as f64).sqrt();
        let mut wide_r2 = Vec::new();
        let mut narrow_r2 = Vec::new();
        for seed in 0..20 {
            let mut cfg = LimeConfig {
                n_samples: 4000,
                discretizer: DiscretizerKind::None,
                kernel_width: KernelWidth::Fixed(wide_width),
                seed,
                ..Default::default()
            };
            wide_r2.push(
                explain_instance(&model, &instance, 0, &names, &disc, &cfg)
                    .unwrap()
                    .r2,
            );
            cfg.kernel_width = KernelWidth::Fixed(wide_width / 10.0);
            narrow_r2.push(
                explain_instance(&model, &instance, 0, &names, &disc, &cfg)
                    .unwrap()
                    .r2,
            );
        }
        let median = |xs: &mut Vec<f64>| {
            xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            xs[xs.len() / 2]
        };
        assert!(median(&mut narrow_r2) >= median(&mut wide_r2) - 1e-9);
    }

    #[test]
    fn condition_rendering_follows_bins() {
        let x_train = training_ramp(100, 1);
        let disc = Discretizer::fit_quartile(&x_train);
        // instance in the top bin
        let text = condition_text(&disc, 0, "total_pymnt", 90.0);
        assert!(text.starts_with("total_pymnt > "), "{text}");
        let low = condition_text(&disc, 0, "total_pymnt", 2.0);
        assert!(low.starts_with("total_pymnt <= "), "{low}");
    }
}
