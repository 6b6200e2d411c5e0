//! Per-feature discretization of the training distribution. Numeric
//! features with at least four distinct values get quartile bins with
//! closed-left edges; features with fewer distinct values are treated as
//! categorical-like, sampled from their training frequencies.

use crate::util::matrix::Matrix;
use crate::util::stats;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct BinStat {
    pub mean: f64,
    pub sd: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "bins", rename_all = "snake_case")]
pub enum FeatureBins {
    /// Edges at the 25th/50th/75th percentiles. A value lands in the first
    /// bin whose edge it does not exceed (ties go to the lower bin).
    Quartile {
        edges: [f64; 3],
        stats: [BinStat; 4],
    },
    /// Distinct training values with their frequencies.
    Discrete { values: Vec<f64>, freqs: Vec<f64> },
    Constant { value: f64 },
}

impl FeatureBins {
    pub fn bin_of(&self, v: f64) -> usize {
        match self {
            FeatureBins::Quartile { edges, .. } => {
                edges.iter().position(|e| v <= *e).unwrap_or(3)
            }
            FeatureBins::Discrete { values, .. } => values
                .iter()
                .position(|x| (x - v).abs() < 1e-12)
                .unwrap_or_else(|| {
                    // nearest value for points outside the training vocabulary
                    values
                        .iter()
                        .enumerate()
                        .min_by(|a, b| {
                            (a.1 - v).abs().partial_cmp(&(b.1 - v).abs()).unwrap()
                        })
                        .map(|(i, _)| i)
                        .unwrap_or(0)
                }),
            FeatureBins::Constant { .. } => 0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Discretizer {
    Quartile { features: Vec<FeatureBins> },
    /// No discretization: perturbations are Gaussian draws around the
    /// training moments and the interpretable representation is the
    /// z-scored value.
    Raw { mean: Vec<f64>, sd: Vec<f64> },
}

impl Discretizer {
    pub fn n_features(&self) -> usize {
        match self {
            Discretizer::Quartile { features } => features.len(),
            Discretizer::Raw { mean, .. } => mean.len(),
        }
    }

    pub fn fit_quartile(x: &Matrix) -> Self {
        let features = (0..x.n_cols())
            .map(|j| fit_feature(&x.col(j)))
            .collect();
        Discretizer::Quartile { features }
    }

    pub fn fit_raw(x: &Matrix) -> Self {
        let mut mean = Vec::with_capacity(x.n_cols());
        let mut sd = Vec::with_capacity(x.n_cols());
        for j in 0..x.n_cols() {
            let col = x.col(j);
            mean.push(stats::mean(&col));
            let s = stats::std_dev(&col);
            sd.push(if s > 0.0 { s } else { 1.0 });
        }
        Discretizer::Raw { mean, sd }
    }
}

fn fit_feature(col: &[f64]) -> FeatureBins {
    let mut sorted = col.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut distinct = sorted.clone();
    distinct.dedup();
    if distinct.len() == 1 {
        return FeatureBins::Constant { value: distinct[0] };
    }
    if distinct.len() < 4 {
        let freqs = distinct
            .iter()
            .map(|v| sorted.iter().filter(|x| *x == v).count() as f64 / col.len() as f64)
            .collect();
        return FeatureBins::Discrete {
            values: distinct,
            freqs,
        };
    }
    let edges = [
        stats::quantile_sorted(&sorted, 0.25),
        stats::quantile_sorted(&sorted, 0.50),
        stats::quantile_sorted(&sorted, 0.75),
    ];
    let mut stats_per_bin = [BinStat::default(); 4];
    let mut members: [Vec<f64>; 4] = Default::default();
    let probe = FeatureBins::Quartile {
        edges,
        stats: stats_per_bin,
    };
    for &v in col {
        members[probe.bin_of(v)].push(v);
    }
    for (k, bucket) in members.iter().enumerate() {
        stats_per_bin[k] = if bucket.is_empty() {
            // tie-heavy columns can leave interior bins empty; pin them to
            // a representative edge so sampling stays within bounds
            let fallback = match k {
                0 => edges[0],
                1 => (edges[0] + edges[1]) / 2.0,
                2 => (edges[1] + edges[2]) / 2.0,
                _ => edges[2],
            };
            BinStat {
                mean: fallback,
                sd: 0.0,
            }
        } else {
            BinStat {
                mean: stats::mean(bucket),
                sd: stats::std_dev(bucket),
            }
        };
    }
    FeatureBins::Quartile {
        edges,
        stats: stats_per_bin,
    }
}
