//! Background distributions for masked predictions: the full training set,
//! a uniform sub-sample, or weighted k-means centroids (Lloyd's algorithm
//! with k-means++ seeding) summarizing a sub-sample.

use super::ShapError;
use crate::util::matrix::Matrix;
use crate::util::rng::Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackgroundProvenance {
    KMeans { k: usize, source_n: usize },
    Sample { n: usize },
    Full,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Background {
    pub rows: Matrix,
    /// Non-negative, summing to 1.
    pub weights: Vec<f64>,
    pub provenance: BackgroundProvenance,
}

impl Background {
    pub fn full(x: &Matrix) -> Self {
        let n = x.n_rows();
        Background {
            rows: x.clone(),
            weights: vec![1.0 / n as f64; n],
            provenance: BackgroundProvenance::Full,
        }
    }

    pub fn sample(x: &Matrix, n: usize, seed: u64) -> Self {
        let take = n.min(x.n_rows());
        let mut rng = Rng::new(seed);
        let mut idx = rng.sample_indices(x.n_rows(), take);
        idx.sort_unstable();
        Background {
            rows: x.select_rows(&idx),
            weights: vec![1.0 / take as f64; take],
            provenance: BackgroundProvenance::Sample { n: take },
        }
    }

    pub fn k(&self) -> usize {
        self.rows.n_rows()
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Sub-sample `source_n` rows, then run k-means and weight each centroid by
/// its cluster size. Empty clusters are re-seeded at the point farthest
/// from its assigned centroid.
pub fn summarize_background(
    x_train: &Matrix,
    k: usize,
    source_n: usize,
    seed: u64,
) -> Result<Background, ShapError> {
    if x_train.n_rows() == 0 || k == 0 {
        return Err(ShapError::EmptyBackground);
    }
    let mut rng = Rng::new(seed);
    let take = source_n.min(x_train.n_rows());
    let mut idx = rng.sample_indices(x_train.n_rows(), take);
    idx.sort_unstable();
    let source = x_train.select_rows(&idx);
    let n = source.n_rows();
    let k = k.min(n);
    let d = source.n_cols();

    // k-means++ seeding
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    centroids.push(source.row(rng.below(n)).to_vec());
    let mut best_dist: Vec<f64> = (0..n)
        .map(|i| sq_dist(source.row(i), &centroids[0]))
        .collect();
    while centroids.len() < k {
        let total: f64 = best_dist.iter().sum();
        let next = if total <= 0.0 {
            rng.below(n)
        } else {
            rng.pick_weighted(&best_dist)
        };
        centroids.push(source.row(next).to_vec());
        let c = centroids.last().unwrap();
        for i in 0..n {
            let dist = sq_dist(source.row(i), c);
            if dist < best_dist[i] {
                best_dist[i] = dist;
            }
        }
    }

    let mut assignment = vec![0usize; n];
    for _ in 0..100 {
        // assign
        for i in 0..n {
            let row = source.row(i);
            let mut best = (0usize, f64::INFINITY);
            for (c, centroid) in centroids.iter().enumerate() {
                let dist = sq_dist(row, centroid);
                if dist < best.1 {
                    best = (c, dist);
                }
            }
            assignment[i] = best.0;
        }
        // handle empty clusters: re-seed at the farthest point
        loop {
            let mut counts = vec![0usize; k];
            for &a in &assignment {
                counts[a] += 1;
            }
            let Some(empty) = counts.iter().position(|&c| c == 0) else {
                break;
            };
            let farthest = (0..n)
                .max_by(|&a, &b| {
                    let da = sq_dist(source.row(a), &centroids[assignment[a]]);
                    let db = sq_dist(source.row(b), &centroids[assignment[b]]);
                    da.partial_cmp(&db).unwrap()
                })
                .unwrap();
            centroids[empty] = source.row(farthest).to_vec();
            assignment[farthest] = empty;
        }
        // update
        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for i in 0..n {
            counts[assignment[i]] += 1;
            for (s, v) in sums[assignment[i]].iter_mut().zip(source.row(i)) {
                *s += v;
            }
        }
        let mut shift: f64 = 0.0;
        for c in 0..k {
            if counts[c] == 0 {
                continue;
            }
            let mut moved = 0.0;
            for j in 0..d {
                let new = sums[c][j] / counts[c] as f64;
                moved += (new - centroids[c][j]) * (new - centroids[c][j]);
                centroids[c][j] = new;
            }
            shift = shift.max(moved.sqrt());
        }
        if shift < 1e-6 {
            break;
        }
    }

    let mut counts = vec![0usize; k];
    for i in 0..n {
        let row = source.row(i);
        let mut best = (0usize, f64::INFINITY);
        for (c, centroid) in centroids.iter().enumerate() {
            let dist = sq_dist(row, centroid);
            if dist < best.1 {
                best = (c, dist);
            }
        }
        counts[best.0] += 1;
    }
    let weights: Vec<f64> = counts.iter().map(|&c| c as f64 / n as f64).collect();
    Ok(Background {
        rows: Matrix::from_rows(&centroids),
        weights,
        provenance: BackgroundProvenance::KMeans { k, source_n: take },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k1_is_column_means() {
        let x = Matrix::from_rows(&[vec![1.0, 10.0], vec![3.0, 20.0], vec![5.0, 60.0]]);
        let bg = summarize_background(&x, 1, 100, 0).unwrap();
        assert_eq!(bg.k(), 1);
        assert!((bg.rows.get(0, 0) - 3.0).abs() < 1e-12);
        assert!((bg.rows.get(0, 1) - 30.0).abs() < 1e-12);
        assert_eq!(bg.weights, vec![1.0]);
    }

    #[test]
    fn two_blobs_recovered() {
        let mut rng = Rng::new(7);
        let mut rows = Vec::new();
        for _ in 0..400 {
            rows.push(vec![rng.normal() * 0.5, 5.0 + rng.normal() * 0.5]);
            rows.push(vec![10.0 + rng.normal() * 0.5, -5.0 + rng.normal() * 0.5]);
        }
        let x = Matrix::from_rows(&rows);
        let bg = summarize_background(&x, 2, 20_000, 3).unwrap();
        let mut centroids: Vec<&[f64]> = (0..2).map(|i| bg.rows.row(i)).collect();
        centroids.sort_by(|a, b| a[0].partial_cmp(&b[0]).unwrap());
        // within 0.1 sd of the blob means
        assert!((centroids[0][0] - 0.0).abs() < 0.05);
        assert!((centroids[0][1] - 5.0).abs() < 0.05);
        assert!((centroids[1][0] - 10.0).abs() < 0.05);
        assert!((centroids[1][1] + 5.0).abs() < 0.05);
        assert!((bg.weights[0] - 0.5).abs() < 0.02);
    }

    #[test]
    fn weights_sum_to_one() {
        let mut rng = Rng::new(1);
        let rows: Vec<Vec<f64>> = (0..300)
            .map(|_| (0..4).map(|_| rng.normal()).collect())
            .collect();
        let x = Matrix::from_rows(&rows);
        for k in [1, 5, 30] {
            let bg = summarize_background(&x, k, 200, 9).unwrap();
            let total: f64 = bg.weights.iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
            assert_eq!(bg.k(), k.min(200));
        }
    }

    #[test]
    fn sample_background_uniform_weights() {
        let rows: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64]).collect();
        let x = Matrix::from_rows(&rows);
        let bg = Background::sample(&x, 10, 4);
        assert_eq!(bg.k(), 10);
        assert!((bg.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(bg.provenance, BackgroundProvenance::Sample { n: 10 });
    }
}
