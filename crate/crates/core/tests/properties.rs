//! Property-based invariants over the pipeline and the model contract.

use creditlens::dataset::{
    drop_sparse_columns, one_hot_encode, preprocess, Cell, ColumnKind, Dataset, PrepConfig,
};
use creditlens::model::{
    evaluate_scores, train_boosted, train_forest, train_logistic, train_mlp, train_svm_linear,
    BoostedParams, ForestParams, LogisticParams, MlpParams, SvmParams,
};
use creditlens::util::matrix::Matrix;
use proptest::prelude::*;

fn categorical_dataset(levels: Vec<Vec<u8>>, numerics: Vec<Vec<f64>>) -> Dataset {
    let n = levels[0].len();
    let mut column_names: Vec<String> = (0..levels.len()).map(|j| format!("cat{j}")).collect();
    let mut column_kinds = vec![ColumnKind::Categorical; levels.len()];
    for j in 0..numerics.len() {
        column_names.push(format!("num{j}"));
        column_kinds.push(ColumnKind::Numeric);
    }
    let rows = (0..n)
        .map(|i| {
            let mut row: Vec<Cell> = levels
                .iter()
                .map(|col| Cell::Cat(format!("l{}", col[i])))
                .collect();
            row.extend(numerics.iter().map(|col| Cell::Num(col[i])));
            row
        })
        .collect();
    Dataset {
        column_names,
        column_kinds,
        rows,
        target: Some((0..n).map(|i| (i % 2) as u8).collect()),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    // every original categorical feature's indicator block sums to exactly 1
    #[test]
    fn one_hot_partition(
        levels in proptest::collection::vec(proptest::collection::vec(0u8..4, 12..40), 1..3),
        numerics in proptest::collection::vec(proptest::collection::vec(-100.0f64..100.0, 12..40), 0..2),
    ) {
        let n = levels[0].len();
        let levels: Vec<Vec<u8>> = levels.into_iter().map(|mut c| { c.resize(n, 0); c }).collect();
        let numerics: Vec<Vec<f64>> = numerics.into_iter().map(|mut c| { c.resize(n, 0.0); c }).collect();
        let d = categorical_dataset(levels.clone(), numerics);
        let m = one_hot_encode(&d).unwrap();
        for source in 0..levels.len() {
            let cols: Vec<usize> = m.encoder.columns.iter().enumerate()
                .filter(|(_, c)| c.source == format!("cat{source}") && c.level.is_some())
                .map(|(j, _)| j)
                .collect();
            for i in 0..m.n_rows() {
                let sum: f64 = cols.iter().map(|&j| m.x.get(i, j)).sum();
                prop_assert!((sum - 1.0).abs() < 1e-12);
            }
        }
    }

    // lowering the threshold never retains a column that a higher one dropped
    #[test]
    fn sparse_drop_monotone(
        pattern in proptest::collection::vec(proptest::collection::vec(proptest::bool::ANY, 30), 1..5),
        lo in 0.05f64..0.5,
        hi_delta in 0.05f64..0.45,
    ) {
        let hi = (lo + hi_delta).min(1.0);
        let n = pattern[0].len();
        let column_names: Vec<String> = (0..pattern.len()).map(|j| format!("c{j}")).collect();
        let column_kinds = vec![ColumnKind::Numeric; pattern.len()];
        let rows: Vec<Vec<Cell>> = (0..n)
            .map(|i| pattern.iter().map(|col| if col[i] { Cell::Missing } else { Cell::Num(1.0) }).collect())
            .collect();
        let d = Dataset { column_names, column_kinds, rows, target: None };
        let low = drop_sparse_columns(&d, lo);
        let high = drop_sparse_columns(&d, hi);
        if let (Ok((low_d, _, _)), Ok((high_d, _, _))) = (low, high) {
            for name in &low_d.column_names {
                prop_assert!(high_d.column_names.contains(name),
                    "column {name} retained at {lo} but dropped at {hi}");
            }
        }
    }

    // every model kind emits probabilities in [0, 1] on arbitrary inputs
    #[test]
    fn probability_range_all_kinds(seed in 0u64..5000) {
        let mut rng = creditlens::util::rng::Rng::new(seed);
        let n = 30;
        let d = 4;
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.normal() * (1.0 + rng.uniform() * 50.0)).collect())
            .collect();
        let x = Matrix::from_rows(&rows);
        let y: Vec<u8> = (0..n).map(|i| u8::from(i % 3 == 0)).collect();
        let probe_rows: Vec<Vec<f64>> = (0..10)
            .map(|_| (0..d).map(|_| rng.normal() * 100.0).collect())
            .collect();
        let probe = Matrix::from_rows(&probe_rows);

        let all_probs = [
            train_logistic(&x, &y, &LogisticParams { max_iters: 200, ..Default::default() }).unwrap().predict(&probe),
            train_forest(&x, &y, &ForestParams { n_trees: 5, max_depth: 3, ..Default::default() }).unwrap().predict(&probe),
            train_boosted(&x, &y, &BoostedParams { n_rounds: 10, ..Default::default() }).unwrap().predict(&probe),
            train_svm_linear(&x, &y, &SvmParams { epochs: 5, ..Default::default() }).unwrap().predict(&probe),
            train_mlp(&x, &y, &MlpParams { hidden: vec![4], epochs: 2, ..Default::default() }).unwrap().predict(&probe),
        ];
        for probs in all_probs {
            for p in probs {
                prop_assert!((0.0..=1.0).contains(&p), "probability {p} out of range");
            }
        }
    }

    // ROC-AUC is invariant under strictly monotone score transformations
    #[test]
    fn auc_monotone_invariance(
        scores in proptest::collection::vec(0.001f64..0.999, 10..60),
        labels in proptest::collection::vec(proptest::bool::ANY, 10..60),
    ) {
        let n = scores.len().min(labels.len());
        let scores = &scores[..n];
        let labels: Vec<u8> = labels[..n].iter().map(|&b| u8::from(b)).collect();
        prop_assume!(labels.iter().any(|&l| l == 0) && labels.iter().any(|&l| l == 1));
        let auc = evaluate_scores(scores, &labels, 0.5).roc_auc;
        let transformed: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp() + s * s).collect();
        let auc_t = evaluate_scores(&transformed, &labels, 0.5).roc_auc;
        prop_assert!((auc - auc_t).abs() < 1e-12);
    }
}

// seeded pipeline determinism, bit for bit
#[test]
fn preprocessing_is_bit_deterministic() {
    use creditlens::dataset::{generate_synthetic, train_test_split, SplitSpec, SynthConfig};
    let run = || {
        let (data, _) = generate_synthetic(&SynthConfig::new(800, 3));
        let (encoded, _) = preprocess(data, &PrepConfig::default()).unwrap();
        train_test_split(&encoded, &SplitSpec::default()).unwrap()
    };
    let (train_a, test_a) = run();
    let (train_b, test_b) = run();
    assert_eq!(
        serde_json::to_vec(&train_a).unwrap(),
        serde_json::to_vec(&train_b).unwrap()
    );
    assert_eq!(
        serde_json::to_vec(&test_a).unwrap(),
        serde_json::to_vec(&test_b).unwrap()
    );
}
