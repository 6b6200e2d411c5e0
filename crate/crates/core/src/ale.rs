//! Accumulated Local Effects: within-interval prediction differences over
//! quantile intervals, accumulated and centered by the data-weighted mean.
//! Unlike partial dependence this never evaluates the model far from the
//! data, at the cost of a piecewise-constant caveat for tree models.

use crate::model::Predictor;
use crate::util::matrix::Matrix;
use crate::util::stats;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AleError {
    #[error("feature {0} is constant; its ALE curve is identically zero")]
    ConstantFeature(usize),
    #[error("need at least 2 intervals, got {0}")]
    TooFewIntervals(usize),
    #[error("feature index {got} out of range for {d} features")]
    FeatureOutOfRange { got: usize, d: usize },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AleCurve {
    pub feature: usize,
    pub feature_name: String,
    /// Interval boundaries, strictly increasing after degenerate merge;
    /// length B + 1 (a constant feature yields a single edge and B = 0).
    pub edges: Vec<f64>,
    /// Centered accumulated effect at the right edge of each interval.
    pub effects: Vec<f64>,
    /// Data points per interval.
    pub counts: Vec<usize>,
    /// Centered curve value at the left-most edge (the accumulation zero).
    pub anchor_value: f64,
}

impl AleCurve {
    /// Piecewise-linear interpolation of the centered curve; clamped at the
    /// outer edges. The left-most edge carries the centered zero anchor.
    pub fn evaluate_at(&self, x: f64) -> f64 {
        if self.effects.is_empty() {
            return 0.0;
        }
        let center_anchor = self.anchor();
        let mut points = Vec::with_capacity(self.edges.len());
        points.push(center_anchor);
        points.extend(self.effects.iter().copied());
        if x <= self.edges[0] {
            return points[0];
        }
        if x >= *self.edges.last().unwrap() {
            return *points.last().unwrap();
        }
        let hi = self.edges.partition_point(|e| *e < x);
        let (x0, x1) = (self.edges[hi - 1], self.edges[hi]);
        let (y0, y1) = (points[hi - 1], points[hi]);
        y0 + (x - x0) / (x1 - x0) * (y1 - y0)
    }

    pub fn anchor(&self) -> f64 {
        self.anchor_value
    }

    pub fn range(&self) -> f64 {
        let mut lo = self.anchor_value;
        let mut hi = self.anchor_value;
        for &e in &self.effects {
            lo = lo.min(e);
            hi = hi.max(e);
        }
        hi - lo
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RefinementReport {
    pub intervals: usize,
    pub doubled_intervals: usize,
    /// max |curve_2B(q) - curve_B(q)| over the data deciles.
    pub max_shift: f64,
    pub curve_range: f64,
    /// max_shift / curve_range (0 when the curve is flat).
    pub shift_fraction: f64,
}

/// Quantile interval edges with duplicates merged; every surviving interval
/// holds at least one point (empty intervals collapse into a neighbor).
pub fn interval_edges(values: &[f64], n_intervals: usize) -> Result<Vec<f64>, AleError> {
    if n_intervals < 2 {
        return Err(AleError::TooFewIntervals(n_intervals));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if sorted.is_empty() || sorted[0] == sorted[sorted.len() - 1] {
        return Err(AleError::ConstantFeature(0));
    }
    let mut edges: Vec<f64> = (0..=n_intervals)
        .map(|i| stats::quantile_sorted(&sorted, i as f64 / n_intervals as f64))
        .collect();
    edges.dedup();
    loop {
        let mut counts = vec![0usize; edges.len() - 1];
        for &v in &sorted {
            counts[interval_of(&edges, v)] += 1;
        }
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            break;
        };
        // drop the empty interval's right edge, or its left when it is last
        if empty + 2 == edges.len() {
            edges.remove(empty);
        } else {
            edges.remove(empty + 1);
        }
    }
    Ok(edges)
}

fn interval_of(edges: &[f64], v: f64) -> usize {
    // interval i covers (edges[i], edges[i+1]]; the first also includes its
    // left edge
    if v <= edges[0] {
        return 0;
    }
    let b = edges.len() - 1;
    (edges.partition_point(|e| *e < v) - 1).min(b - 1)
}

/// First-order ALE curve of `feature` for any probability model.
pub fn ale_curve<P: Predictor>(
    model: &P,
    x: &Matrix,
    feature: usize,
    feature_name: &str,
    n_intervals: usize,
) -> Result<AleCurve, AleError> {
    if feature >= x.n_cols() {
        return Err(AleError::FeatureOutOfRange {
            got: feature,
            d: x.n_cols(),
        });
    }
    let column = x.col(feature);
    let edges = match interval_edges(&column, n_intervals) {
        Ok(e) => e,
        Err(AleError::ConstantFeature(_)) => {
            return Ok(AleCurve {
                feature,
                feature_name: feature_name.to_string(),
                edges: vec![column.first().copied().unwrap_or(0.0)],
                effects: Vec::new(),
                counts: Vec::new(),
                anchor_value: 0.0,
            })
        }
        Err(e) => return Err(e),
    };
    let b = edges.len() - 1;

    // substitute each row's feature with its interval's upper and lower edge
    let mut upper = x.clone();
    let mut lower = x.clone();
    let mut membership = Vec::with_capacity(x.n_rows());
    for i in 0..x.n_rows() {
        let interval = interval_of(&edges, x.get(i, feature));
        membership.push(interval);
        upper.set(i, feature, edges[interval + 1]);
        lower.set(i, feature, edges[interval]);
    }
    let f_upper = model.predict(&upper);
    let f_lower = model.predict(&lower);

    let mut sums = vec![0.0; b];
    let mut counts = vec![0usize; b];
    for (i, &interval) in membership.iter().enumerate() {
        sums[interval] += f_upper[i] - f_lower[i];
        counts[interval] += 1;
    }
    let mut accumulated = Vec::with_capacity(b);
    let mut running = 0.0;
    for i in 0..b {
        let mean_delta = if counts[i] > 0 {
            sums[i] / counts[i] as f64
        } else {
            0.0
        };
        running += mean_delta;
        accumulated.push(running);
    }
    // center by the data-weighted mean of the per-point accumulated values
    let n = x.n_rows() as f64;
    let center: f64 = membership
        .iter()
        .map(|&interval| accumulated[interval])
        .sum::<f64>()
        / n;
    let effects: Vec<f64> = accumulated.iter().map(|a| a - center).collect();

    Ok(AleCurve {
        feature,
        feature_name: feature_name.to_string(),
        edges,
        effects,
        counts,
        anchor_value: -center,
    })
}

/// Compare the curve against a doubled-interval refit at the data deciles.
pub fn refinement_report<P: Predictor>(
    model: &P,
    x: &Matrix,
    feature: usize,
    feature_name: &str,
    n_intervals: usize,
) -> Result<RefinementReport, AleError> {
    let coarse = ale_curve(model, x, feature, feature_name, n_intervals)?;
    let fine = ale_curve(model, x, feature, feature_name, n_intervals * 2)?;
    let column = x.col(feature);
    let mut max_shift: f64 = 0.0;
    for decile in 1..10 {
        let q = stats::quantile(&column, decile as f64 / 10.0);
        max_shift = max_shift.max((coarse.evaluate_at(q) - fine.evaluate_at(q)).abs());
    }
    let curve_range = coarse.range();
    Ok(RefinementReport {
        intervals: n_intervals,
        doubled_intervals: n_intervals * 2,
        max_shift,
        curve_range,
        shift_fraction: if curve_range > 0.0 {
            max_shift / curve_range
        } else {
            0.0
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FnModel;
    use crate::util::rng::Rng;

    #[test]
    fn integer_sequence_counts() {
        let values: Vec<f64> = (1..=100).map(|v| v as f64).collect();
        let edges = interval_edges(&values, 20).unwrap();
        assert_eq!(edges.len(), 21);
        let mut counts = vec![0usize; 20];
        for &v in &values {
            counts[interval_of(&edges, v)] += 1;
        }
        assert!(counts.iter().all(|&c| c == 5), "counts {counts:?}");
    }

    #[test]
    fn constant_feature_zero_curve() {
        let x = Matrix::from_rows(&vec![vec![3.0, 1.0]; 50]);
        let model = FnModel::new(2, |r: &[f64]| r[0] + r[1]);
        let curve = ale_curve(&model, &x, 0, "const", 10).unwrap();
        assert!(curve.effects.is_empty());
        assert_eq!(curve.evaluate_at(3.0), 0.0);
    }

    #[test]
    fn sparse_data_never_leaves_empty_intervals() {
        // more intervals than points: interpolated edges collapse
        let edges = interval_edges(&[0.0, 10.0], 4).unwrap();
        assert_eq!(edges.first(), Some(&0.0));
        assert_eq!(edges.last(), Some(&10.0));
        let mut counts = vec![0usize; edges.len() - 1];
        for v in [0.0, 10.0] {
            counts[interval_of(&edges, v)] += 1;
        }
        assert!(counts.iter().all(|&c| c > 0), "edges {edges:?}");
    }

    #[test]
    fn tied_column_merges_edges() {
        let mut values: Vec<Vec<f64>> = vec![vec![0.0]; 90];
        values.extend((1..=10).map(|v| vec![v as f64]));
        let x = Matrix::from_rows(&values);
        let edges = interval_edges(&x.col(0), 20).unwrap();
        assert!(edges.len() - 1 < 20, "edges {edges:?}");
        // no empty interval
        let mut counts = vec![0usize; edges.len() - 1];
        for i in 0..x.n_rows() {
            counts[interval_of(&edges, x.get(i, 0))] += 1;
        }
        assert!(counts.iter().all(|&c| c > 0), "counts {counts:?}");
    }

    #[test]
    fn linear_score_reproduces_slope() {
        let mut rng = Rng::new(2);
        let rows: Vec<Vec<f64>> = (0..2000)
            .map(|_| vec![rng.normal() * 2.0, rng.normal()])
            .collect();
        let x = Matrix::from_rows(&rows);
        let model = FnModel::new(2, |r: &[f64]| 3.0 * r[0] + 0.5 * r[1]);
        let curve = ale_curve(&model, &x, 0, "x0", 20).unwrap();
        // slope between consecutive accumulated points is exactly 3
        let mut prev = (curve.edges[0], curve.anchor());
        for (i, &e) in curve.effects.iter().enumerate() {
            let edge = curve.edges[i + 1];
            let slope = (e - prev.1) / (edge - prev.0);
            assert!((slope - 3.0).abs() < 1e-6, "interval {i}: slope {slope}");
            prev = (edge, e);
        }
    }

    #[test]
    fn constant_model_zero_effects() {
        let mut rng = Rng::new(4);
        let rows: Vec<Vec<f64>> = (0..200).map(|_| vec![rng.normal()]).collect();
        let x = Matrix::from_rows(&rows);
        let model = FnModel::new(1, |_: &[f64]| 0.42);
        let curve = ale_curve(&model, &x, 0, "x0", 10).unwrap();
        for &e in &curve.effects {
            assert!(e.abs() < 1e-12);
        }
    }

    #[test]
    fn centering_invariant() {
        let mut rng = Rng::new(6);
        let rows: Vec<Vec<f64>> = (0..1500)
            .map(|_| vec![rng.normal(), rng.normal()])
            .collect();
        let x = Matrix::from_rows(&rows);
        let model = FnModel::new(2, |r: &[f64]| crate::util::stats::sigmoid(r[0] * r[1] + r[0]));
        let curve = ale_curve(&model, &x, 0, "x0", 20).unwrap();
        let weighted: f64 = curve
            .effects
            .iter()
            .zip(&curve.counts)
            .map(|(e, &c)| e * c as f64)
            .sum();
        assert!(weighted.abs() / (x.n_rows() as f64) < 1e-9, "mean {weighted}");
    }

    #[test]
    fn additive_model_separates() {
        // f = g(x0) + h(x1): the ALE of x0 tracks g up to its data mean,
        // independent of h
        let mut rng = Rng::new(8);
        let rows: Vec<Vec<f64>> = (0..10_000)
            .map(|_| vec![rng.uniform() * 4.0 - 2.0, rng.normal() * 3.0])
            .collect();
        let x = Matrix::from_rows(&rows);
        let model = FnModel::new(2, |r: &[f64]| r[0] * r[0] + (r[1] * 2.0).sin());
        let curve = ale_curve(&model, &x, 0, "x0", 40).unwrap();
        let g = |v: f64| v * v;
        let g_mean: f64 = (0..x.n_rows()).map(|i| g(x.get(i, 0))).sum::<f64>() / x.n_rows() as f64;
        let range = curve.range();
        for (i, &e) in curve.effects.iter().enumerate() {
            let edge = curve.edges[i + 1];
            let want = g(edge) - g_mean;
            assert!(
                (e - want).abs() < 0.05 * range,
                "edge {edge}: {e} vs {want}"
            );
        }
    }

    #[test]
    fn monotone_model_monotone_curve() {
        let mut rng = Rng::new(10);
        let rows: Vec<Vec<f64>> = (0..1000)
            .map(|_| vec![rng.normal(), rng.normal()])
            .collect();
        let x = Matrix::from_rows(&rows);
        let model = FnModel::new(2, |r: &[f64]| {
            crate::util::stats::sigmoid(1.5 * r[0] - 0.5 * r[1])
        });
        let curve = ale_curve(&model, &x, 0, "x0", 15).unwrap();
        let mut prev = curve.anchor();
        for &e in &curve.effects {
            assert!(e >= prev - 1e-12);
            prev = e;
        }
    }

    #[test]
    fn refinement_is_stable_for_smooth_model() {
        let mut rng = Rng::new(12);
        let rows: Vec<Vec<f64>> = (0..5000)
            .map(|_| vec![rng.normal() * 2.0, rng.normal()])
            .collect();
        let x = Matrix::from_rows(&rows);
        let model = FnModel::new(2, |r: &[f64]| {
            crate::util::stats::sigmoid(0.8 * r[0] + 0.3 * r[1])
        });
        let report = refinement_report(&model, &x, 0, "x0", 20).unwrap();
        assert!(
            report.shift_fraction < 0.05,
            "shift fraction {}",
            report.shift_fraction
        );
    }
}
