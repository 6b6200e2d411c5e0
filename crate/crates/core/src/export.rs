//! Plot-ready exports from attribution matrices: summary rankings,
//! dependence points with an interaction partner, stacked force data, and
//! the information-gain vs mean-|phi| comparison report.

use crate::shap::ShapMatrix;
use crate::util::matrix::Matrix;
use crate::util::stats;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("attribution matrix rows ({sm}) do not align with data rows ({data})")]
    ShapeMismatch { sm: usize, data: usize },
    #[error("attribution matrix is empty")]
    EmptyMatrix,
    #[error("feature `{0}` not present in the explained set")]
    FeatureNotFound(String),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SummaryFeature {
    pub feature: String,
    pub feature_index: usize,
    pub mean_abs_phi: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SummaryPoint {
    /// Rank of the feature in the retained ordering (0 = most important).
    pub feature_rank: usize,
    pub phi: f64,
    /// Min-max normalized feature value for the color channel.
    pub normalized_value: f64,
}

/// Data behind a beeswarm-style summary plot.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SummaryData {
    pub features: Vec<SummaryFeature>,
    pub points: Vec<SummaryPoint>,
    pub top_n: usize,
}

pub fn summary_data(
    sm: &ShapMatrix,
    x_explain: &Matrix,
    top_n: usize,
) -> Result<SummaryData, ExportError> {
    if sm.n_rows() != x_explain.n_rows() {
        return Err(ExportError::ShapeMismatch {
            sm: sm.n_rows(),
            data: x_explain.n_rows(),
        });
    }
    let means = sm.mean_abs_phi();
    let mut order: Vec<usize> = (0..means.len()).collect();
    order.sort_by(|&a, &b| means[b].partial_cmp(&means[a]).unwrap().then(a.cmp(&b)));
    order.truncate(top_n.min(means.len()));

    let features: Vec<SummaryFeature> = order
        .iter()
        .map(|&j| SummaryFeature {
            feature: sm.feature_names[j].clone(),
            feature_index: j,
            mean_abs_phi: means[j],
        })
        .collect();

    let mut points = Vec::with_capacity(order.len() * sm.n_rows());
    for (rank, &j) in order.iter().enumerate() {
        let column = x_explain.col(j);
        let lo = column.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = column.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let span = hi - lo;
        for (i, result) in sm.results.iter().enumerate() {
            points.push(SummaryPoint {
                feature_rank: rank,
                phi: result.phi[j],
                normalized_value: if span > 0.0 {
                    (column[i] - lo) / span
                } else {
                    0.5
                },
            });
        }
    }
    Ok(SummaryData {
        features,
        points,
        top_n,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DependencePoint {
    pub x_j: f64,
    pub phi_j: f64,
    pub x_partner: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DependenceData {
    pub feature: String,
    pub feature_index: usize,
    pub partner: String,
    pub partner_index: usize,
    pub points: Vec<DependencePoint>,
    /// Interaction score per candidate feature index (self is 0).
    pub scores: Vec<f64>,
}

/// Interaction-partner rule: bin x_j into deciles; within each bin take the
/// |Pearson correlation| between the candidate column and phi_j; score is
/// the count-weighted mean across bins. Ties break toward the lower index.
pub fn dependence_data(
    sm: &ShapMatrix,
    x_explain: &Matrix,
    feature: usize,
) -> Result<DependenceData, ExportError> {
    if sm.n_rows() != x_explain.n_rows() {
        return Err(ExportError::ShapeMismatch {
            sm: sm.n_rows(),
            data: x_explain.n_rows(),
        });
    }
    if sm.n_rows() == 0 {
        return Err(ExportError::EmptyMatrix);
    }
    let d = sm.feature_names.len();
    if feature >= d {
        return Err(ExportError::FeatureNotFound(format!("index {feature}")));
    }
    let x_j = x_explain.col(feature);
    let phi_j: Vec<f64> = sm.results.iter().map(|r| r.phi[feature]).collect();

    // decile bins over x_j
    let mut edges: Vec<f64> = (0..=10)
        .map(|q| stats::quantile(&x_j, q as f64 / 10.0))
        .collect();
    edges.dedup();
    let bin_of = |v: f64| -> usize {
        if v <= edges[0] {
            0
        } else {
            (edges.partition_point(|e| *e < v) - 1).min(edges.len().saturating_sub(2))
        }
    };
    let n_bins = (edges.len() - 1).max(1);
    let mut bins: Vec<Vec<usize>> = vec![Vec::new(); n_bins];
    for (i, &v) in x_j.iter().enumerate() {
        bins[bin_of(v)].push(i);
    }

    let mut scores = vec![0.0; d];
    for (k, score) in scores.iter_mut().enumerate() {
        if k == feature {
            continue;
        }
        let column = x_explain.col(k);
        let mut weighted = 0.0;
        let mut weight_total = 0.0;
        for members in &bins {
            if members.len() < 3 {
                continue;
            }
            let xs: Vec<f64> = members.iter().map(|&i| column[i]).collect();
            let ys: Vec<f64> = members.iter().map(|&i| phi_j[i]).collect();
            if let Some(r) = stats::pearson(&xs, &ys) {
                weighted += members.len() as f64 * r.abs();
                weight_total += members.len() as f64;
            }
        }
        *score = if weight_total > 0.0 {
            weighted / weight_total
        } else {
            0.0
        };
    }
    let partner = (0..d)
        .filter(|&k| k != feature)
        .max_by(|&a, &b| {
            scores[a]
                .partial_cmp(&scores[b])
                .unwrap()
                .then(b.cmp(&a)) // ties: lower index wins under max_by
        })
        .unwrap_or(feature);

    let x_partner = x_explain.col(partner);
    let points = (0..sm.n_rows())
        .map(|i| DependencePoint {
            x_j: x_j[i],
            phi_j: phi_j[i],
            x_partner: x_partner[i],
        })
        .collect();
    Ok(DependenceData {
        feature: sm.feature_names[feature].clone(),
        feature_index: feature,
        partner: sm.feature_names[partner].clone(),
        partner_index: partner,
        points,
        scores,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "sort", rename_all = "snake_case")]
pub enum ForceSort {
    ByOutput,
    ByFeature { feature: usize },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ForceContribution {
    pub feature: String,
    pub phi: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ForceInstance {
    pub instance: usize,
    pub base_value: f64,
    pub fx: f64,
    /// Key the stacking order was built from (fx, or the feature value).
    pub sort_value: f64,
    /// Signed contributions, descending |phi|.
    pub contributions: Vec<ForceContribution>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ForceData {
    pub sort: ForceSort,
    pub instances: Vec<ForceInstance>,
}

pub fn force_data(
    sm: &ShapMatrix,
    x_explain: &Matrix,
    sort: ForceSort,
) -> Result<ForceData, ExportError> {
    if sm.n_rows() == 0 {
        return Err(ExportError::EmptyMatrix);
    }
    if sm.n_rows() != x_explain.n_rows() {
        return Err(ExportError::ShapeMismatch {
            sm: sm.n_rows(),
            data: x_explain.n_rows(),
        });
    }
    if let ForceSort::ByFeature { feature } = sort {
        if feature >= sm.feature_names.len() {
            return Err(ExportError::FeatureNotFound(format!("index {feature}")));
        }
    }
    let mut instances: Vec<ForceInstance> = sm
        .results
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut contributions: Vec<ForceContribution> = r
                .phi
                .iter()
                .enumerate()
                .map(|(j, &phi)| ForceContribution {
                    feature: sm.feature_names[j].clone(),
                    phi,
                })
                .collect();
            contributions.sort_by(|a, b| {
                b.phi
                    .abs()
                    .partial_cmp(&a.phi.abs())
                    .unwrap()
                    .then(a.feature.cmp(&b.feature))
            });
            let sort_value = match sort {
                ForceSort::ByOutput => r.fx,
                ForceSort::ByFeature { feature } => x_explain.get(i, feature),
            };
            ForceInstance {
                instance: i,
                base_value: r.base_value,
                fx: r.fx,
                sort_value,
                contributions,
            }
        })
        .collect();
    instances.sort_by(|a, b| {
        a.sort_value
            .partial_cmp(&b.sort_value)
            .unwrap()
            .then(a.instance.cmp(&b.instance))
    });
    Ok(ForceData { sort, instances })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ImportanceRow {
    pub feature: String,
    /// Normalized information gain (the full vector sums to 1).
    pub gain: f64,
    /// Raw mean |phi|.
    pub mean_abs_phi: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ImportanceComparison {
    /// Every feature with either score, sorted by gain descending.
    pub rows: Vec<ImportanceRow>,
    /// Union of the two top-n sets, for the side-by-side table.
    pub top_union: Vec<String>,
    pub jaccard_top_n: f64,
    pub spearman_on_union: f64,
    pub top_n: usize,
}

/// Side-by-side comparison of normalized information gain against SHAP
/// mean absolute impact.
pub fn importance_compare(
    gain: &[(String, f64)],
    sm: &ShapMatrix,
    top_n: usize,
) -> Result<ImportanceComparison, ExportError> {
    if sm.n_rows() == 0 {
        return Err(ExportError::EmptyMatrix);
    }
    let means = sm.mean_abs_phi();
    let phi_of = |name: &str| -> f64 {
        sm.feature_names
            .iter()
            .position(|n| n == name)
            .map_or(0.0, |j| means[j])
    };
    let mut rows: Vec<ImportanceRow> = gain
        .iter()
        .map(|(name, g)| ImportanceRow {
            feature: name.clone(),
            gain: *g,
            mean_abs_phi: phi_of(name),
        })
        .collect();
    rows.sort_by(|a, b| b.gain.partial_cmp(&a.gain).unwrap().then(a.feature.cmp(&b.feature)));

    let top_gain: Vec<&str> = rows.iter().take(top_n).map(|r| r.feature.as_str()).collect();
    let mut by_phi: Vec<&ImportanceRow> = rows.iter().collect();
    by_phi.sort_by(|a, b| {
        b.mean_abs_phi
            .partial_cmp(&a.mean_abs_phi)
            .unwrap()
            .then(a.feature.cmp(&b.feature))
    });
    let top_phi: Vec<&str> = by_phi.iter().take(top_n).map(|r| r.feature.as_str()).collect();

    let intersection = top_gain.iter().filter(|f| top_phi.contains(f)).count();
    let union_count = top_gain.len() + top_phi.len() - intersection;
    let jaccard = if union_count == 0 {
        1.0
    } else {
        intersection as f64 / union_count as f64
    };

    let mut top_union: Vec<String> = top_gain
        .iter()
        .chain(top_phi.iter())
        .map(|s| s.to_string())
        .collect();
    top_union.sort();
    top_union.dedup();
    let gains_u: Vec<f64> = top_union
        .iter()
        .map(|f| rows.iter().find(|r| &r.feature == f).map_or(0.0, |r| r.gain))
        .collect();
    let phis_u: Vec<f64> = top_union.iter().map(|f| phi_of(f)).collect();
    let spearman = stats::spearman(&gains_u, &phis_u).unwrap_or(0.0);

    Ok(ImportanceComparison {
        rows,
        top_union,
        jaccard_top_n: jaccard,
        spearman_on_union: spearman,
        top_n,
    })
}
