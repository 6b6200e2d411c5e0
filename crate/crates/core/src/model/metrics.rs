//! Threshold metrics plus rank-statistic ROC-AUC. Metrics that are
//! undefined at the given threshold (for example precision with zero
//! predicted positives) are reported as 0 and listed in `undefined`.

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub roc_auc: f64,
    pub true_positives: usize,
    pub false_positives: usize,
    pub true_negatives: usize,
    pub false_negatives: usize,
    pub threshold: f64,
    /// Metric names that were 0-defaulted because their denominator was 0.
    pub undefined: Vec<String>,
}

pub fn evaluate_scores(probs: &[f64], y: &[u8], threshold: f64) -> Metrics {
    assert_eq!(probs.len(), y.len());
    let mut m = Metrics {
        threshold,
        ..Default::default()
    };
    for (&p, &yi) in probs.iter().zip(y) {
        match (p >= threshold, yi == 1) {
            (true, true) => m.true_positives += 1,
            (true, false) => m.false_positives += 1,
            (false, false) => m.true_negatives += 1,
            (false, true) => m.false_negatives += 1,
        }
    }
    let n = y.len();
    m.accuracy = if n == 0 {
        m.undefined.push("accuracy".to_string());
        0.0
    } else {
        (m.true_positives + m.true_negatives) as f64 / n as f64
    };
    let predicted_pos = m.true_positives + m.false_positives;
    m.precision = if predicted_pos == 0 {
        m.undefined.push("precision".to_string());
        0.0
    } else {
        m.true_positives as f64 / predicted_pos as f64
    };
    let actual_pos = m.true_positives + m.false_negatives;
    m.recall = if actual_pos == 0 {
        m.undefined.push("recall".to_string());
        0.0
    } else {
        m.true_positives as f64 / actual_pos as f64
    };
    m.f1 = if m.precision + m.recall == 0.0 {
        m.undefined.push("f1".to_string());
        0.0
    } else {
        2.0 * m.precision * m.recall / (m.precision + m.recall)
    };
    m.roc_auc = match roc_auc(probs, y) {
        Some(auc) => auc,
        None => {
            m.undefined.push("roc_auc".to_string());
            0.0
        }
    };
    m
}

/// Mann-Whitney AUC with tie correction via average ranks.
pub fn roc_auc(scores: &[f64], y: &[u8]) -> Option<f64> {
    let n_pos = y.iter().filter(|&&v| v == 1).count();
    let n_neg = y.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let ranks = crate::util::stats::average_ranks(scores);
    let rank_sum: f64 = ranks
        .iter()
        .zip(y)
        .filter(|(_, &yi)| yi == 1)
        .map(|(r, _)| r)
        .sum();
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Some(u / (n_pos as f64 * n_neg as f64))
}
