//! One-hot encoding of preprocessed datasets and stratified train/test
//! splitting. The encoder map is recorded so new data can be replayed onto
//! an identical column layout.

use super::{ColumnKind, DataError, Dataset};
use crate::util::matrix::Matrix;
use crate::util::rng::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncodedColumn {
    /// Output column name, e.g. `grade=A` or `loan_amnt`.
    pub name: String,
    /// Source dataset column.
    pub source: String,
    /// One-hot level, `None` for numeric pass-through.
    pub level: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderMap {
    pub columns: Vec<EncodedColumn>,
    /// Level vocabulary per categorical source column, in encoding order.
    pub levels: BTreeMap<String, Vec<String>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct UnseenLevelWarning {
    pub column: String,
    pub level: String,
    pub rows: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncodedMatrix {
    pub names: Vec<String>,
    pub x: Matrix,
    pub y: Vec<u8>,
    pub encoder: EncoderMap,
}

impl EncodedMatrix {
    pub fn n_rows(&self) -> usize {
        self.x.n_rows()
    }

    pub fn n_features(&self) -> usize {
        self.x.n_cols()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn save_json(&self, path: &std::path::Path) -> Result<(), DataError> {
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load_json(path: &std::path::Path) -> Result<Self, DataError> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Expand categorical columns into indicator columns (levels sorted for a
/// stable layout) and pass numeric columns through. Requires a binarized
/// target and a fully imputed dataset.
pub fn one_hot_encode(data: &Dataset) -> Result<EncodedMatrix, DataError> {
    let y = data
        .target
        .clone()
        .ok_or(DataError::TargetNotBinarized)?;
    for j in 0..data.n_cols() {
        if data.column_cells(j).any(|c| c.is_missing()) {
            return Err(DataError::MissingValues(data.column_names[j].clone()));
        }
    }

    let mut levels: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for j in 0..data.n_cols() {
        if data.column_kinds[j] == ColumnKind::Categorical {
            let mut seen: Vec<String> = data
                .column_cells(j)
                .filter_map(|c| c.as_cat().map(str::to_string))
                .collect();
            seen.sort();
            seen.dedup();
            levels.insert(data.column_names[j].clone(), seen);
        }
    }

    let mut columns = Vec::new();
    for j in 0..data.n_cols() {
        let source = &data.column_names[j];
        match data.column_kinds[j] {
            ColumnKind::Numeric => columns.push(EncodedColumn {
                name: source.clone(),
                source: source.clone(),
                level: None,
            }),
            ColumnKind::Categorical => {
                for level in &levels[source] {
                    columns.push(EncodedColumn {
                        name: format!("{source}={level}"),
                        source: source.clone(),
                        level: Some(level.clone()),
                    });
                }
            }
            ColumnKind::Target => {
                return Err(DataError::Schema(
                    "target column should have been consumed by binarize_target".to_string(),
                ))
            }
        }
    }

    let encoder = EncoderMap { columns, levels };
    let (x, warnings) = encoder.encode_rows(data)?;
    debug_assert!(warnings.is_empty(), "fit-time data cannot have unseen levels");
    Ok(EncodedMatrix {
        names: encoder.columns.iter().map(|c| c.name.clone()).collect(),
        x,
        y,
        encoder,
    })
}

impl EncoderMap {
    /// Replay the encoding on new data. Unseen categorical levels map to an
    /// all-zero indicator block and are reported as warnings.
    pub fn encode_rows(
        &self,
        data: &Dataset,
    ) -> Result<(Matrix, Vec<UnseenLevelWarning>), DataError> {
        // Resolve source columns once.
        let mut source_index: BTreeMap<&str, usize> = BTreeMap::new();
        for col in &self.columns {
            if !source_index.contains_key(col.source.as_str()) {
                let j = data
                    .column_index(&col.source)
                    .ok_or_else(|| DataError::MissingColumn(col.source.clone()))?;
                source_index.insert(col.source.as_str(), j);
            }
        }
        let mut unseen: BTreeMap<(String, String), usize> = BTreeMap::new();
        let mut x = Matrix::zeros(data.n_rows(), self.columns.len());
        for (i, row) in data.rows.iter().enumerate() {
            for (out_j, col) in self.columns.iter().enumerate() {
                let cell = &row[source_index[col.source.as_str()]];
                match &col.level {
                    None => {
                        let v = cell.as_num().ok_or_else(|| {
                            DataError::MissingValues(col.source.clone())
                        })?;
                        x.set(i, out_j, v);
                    }
                    Some(level) => {
                        let cat = cell.as_cat().ok_or_else(|| {
                            DataError::MissingValues(col.source.clone())
                        })?;
                        if cat == level {
                            x.set(i, out_j, 1.0);
                        }
                    }
                }
            }
            // Track levels absent from the fit-time vocabulary.
            for (source, vocab) in &self.levels {
                if let Some(cat) = row[source_index[source.as_str()]].as_cat() {
                    if !vocab.iter().any(|l| l == cat) {
                        *unseen
                            .entry((source.clone(), cat.to_string()))
                            .or_insert(0) += 1;
                    }
                }
            }
        }
        let warnings = unseen
            .into_iter()
            .map(|((column, level), rows)| UnseenLevelWarning {
                column,
                level,
                rows,
            })
            .collect();
        Ok((x, warnings))
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SplitSpec {
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            test_fraction: 0.2,
            seed: 42,
        }
    }
}

/// Disjoint stratified partition with |test| = round(R * fraction); class
/// ratios in the test split match the data within one row.
pub fn train_test_split(
    m: &EncodedMatrix,
    spec: &SplitSpec,
) -> Result<(EncodedMatrix, EncodedMatrix), DataError> {
    let n = m.n_rows();
    if n < 2 {
        return Err(DataError::InvalidParam(format!(
            "need at least 2 rows to split, got {n}"
        )));
    }
    if !(spec.test_fraction > 0.0 && spec.test_fraction < 1.0) {
        return Err(DataError::InvalidParam(format!(
            "test fraction must be in (0, 1), got {}",
            spec.test_fraction
        )));
    }
    let test_total = (n as f64 * spec.test_fraction).round() as usize;

    let mut class_indices: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, &y) in m.y.iter().enumerate() {
        class_indices[y as usize].push(i);
    }

    // Largest-remainder allocation of the test rows across classes.
    let ideals: Vec<f64> = class_indices
        .iter()
        .map(|c| c.len() as f64 * spec.test_fraction)
        .collect();
    let mut counts: Vec<usize> = ideals.iter().map(|v| v.floor() as usize).collect();
    let mut leftover = test_total.saturating_sub(counts.iter().sum());
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = ideals[a] - ideals[a].floor();
        let fb = ideals[b] - ideals[b].floor();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    for &c in order.iter().cycle().take(counts.len() * 2) {
        if leftover == 0 {
            break;
        }
        if counts[c] < class_indices[c].len() {
            counts[c] += 1;
            leftover -= 1;
        }
    }

    let mut rng = Rng::new(spec.seed);
    let mut test_rows = Vec::new();
    for (class, indices) in class_indices.iter().enumerate() {
        let mut pool = indices.clone();
        rng.shuffle(&mut pool);
        test_rows.extend(pool.into_iter().take(counts[class]));
    }
    test_rows.sort_unstable();
    let in_test: Vec<bool> = {
        let mut mask = vec![false; n];
        for &i in &test_rows {
            mask[i] = true;
        }
        mask
    };
    let train_rows: Vec<usize> = (0..n).filter(|&i| !in_test[i]).collect();

    let take = |rows: &[usize]| EncodedMatrix {
        names: m.names.clone(),
        x: m.x.select_rows(rows),
        y: rows.iter().map(|&i| m.y[i]).collect(),
        encoder: m.encoder.clone(),
    };
    let train = take(&train_rows);
    let test = take(&test_rows);

    for class in 0..2u8 {
        let present = !class_indices[class as usize].is_empty();
        if present && (!train.y.contains(&class) || !test.y.contains(&class)) {
            return Err(DataError::ClassAbsent(class));
        }
    }
    Ok((train, test))
}
