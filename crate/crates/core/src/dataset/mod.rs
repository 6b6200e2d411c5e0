//! Tabular data handling: CSV ingestion, the preprocessing pipeline
//! (sparsity filter, correlation filter, chi-square filter, grade clubbing,
//! target binarization), one-hot encoding, stratified splitting, and a
//! schema-compatible synthetic loan generator.

mod encode;
mod load;
mod preprocess;
mod synth;

pub use encode::{
    one_hot_encode, train_test_split, EncodedColumn, EncodedMatrix, EncoderMap, SplitSpec,
    UnseenLevelWarning,
};
pub use load::{load_csv, load_csv_str, to_csv_string, write_csv};
pub use preprocess::{
    binarize_target, club_grades, drop_sparse_columns, filter_chi_square, filter_correlated,
    ChiSquareResult, CorrelationDrop, Imputation, SparseDrop,
};
pub use synth::{generate_synthetic, synthetic_schema, SynthCoefficients, SynthConfig, SynthTruth};

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("column `{0}` declared in the schema is missing from the input")]
    MissingColumn(String),
    #[error("row {row}: expected {expected} fields, found {found}")]
    RowWidthMismatch {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("no feature column survived the sparsity filter")]
    AllColumnsDropped,
    #[error("no rows left after filtering unmapped loan statuses")]
    EmptyAfterFilter,
    #[error("unknown grade level `{0}` (expected A-G)")]
    UnknownLevel(String),
    #[error("split lost class {0} entirely; lower the test fraction or add rows")]
    ClassAbsent(u8),
    #[error("operation requires a binarized target; run binarize_target first")]
    TargetNotBinarized,
    #[error("column `{0}` still contains missing cells; impute before encoding")]
    MissingValues(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Categorical,
    Target,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Num(f64),
    Cat(String),
    Missing,
}

impl Cell {
    pub fn is_missing(&self) -> bool {
        matches!(self, Cell::Missing)
    }

    pub fn as_num(&self) -> Option<f64> {
        match self {
            Cell::Num(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_cat(&self) -> Option<&str> {
        match self {
            Cell::Cat(s) => Some(s),
            _ => None,
        }
    }
}

/// Column-typed tabular container. `target` is populated by
/// `binarize_target`, which also removes the raw status column from `rows`.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub column_names: Vec<String>,
    pub column_kinds: Vec<ColumnKind>,
    pub rows: Vec<Vec<Cell>>,
    pub target: Option<Vec<u8>>,
}

impl Dataset {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.column_names.len()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.column_names.iter().position(|n| n == name)
    }

    pub fn column_cells(&self, j: usize) -> impl Iterator<Item = &Cell> {
        self.rows.iter().map(move |r| &r[j])
    }

    /// Panics when the width invariant is broken; used by tests and after
    /// structural edits.
    pub fn check_widths(&self) {
        assert_eq!(self.column_names.len(), self.column_kinds.len());
        for (i, r) in self.rows.iter().enumerate() {
            assert_eq!(r.len(), self.column_names.len(), "row {i} width mismatch");
        }
    }
}

/// Column-kind declarations, persisted as a flat JSON map
/// `{"column": "numeric" | "categorical" | "target"}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Schema(pub BTreeMap<String, ColumnKind>);

impl Schema {
    pub fn from_json(text: &str) -> Result<Self, DataError> {
        let schema: Schema = serde_json::from_str(text)?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let targets = self
            .0
            .values()
            .filter(|k| **k == ColumnKind::Target)
            .count();
        if targets != 1 {
            return Err(DataError::Schema(format!(
                "schema must declare exactly one target column, found {targets}"
            )));
        }
        Ok(())
    }

    pub fn kind_of(&self, name: &str) -> Option<ColumnKind> {
        self.0.get(name).copied()
    }
}

/// Settings for the full preprocessing pipeline.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PrepConfig {
    pub sparse_threshold: f64,
    pub corr_max: f64,
    pub chi_alpha: f64,
    /// Categorical column holding loan grades A-G; clubbing is skipped when
    /// the column is absent.
    pub grade_column: String,
}

impl Default for PrepConfig {
    fn default() -> Self {
        PrepConfig {
            sparse_threshold: 0.9,
            corr_max: 0.9,
            chi_alpha: 0.05,
            grade_column: "grade".to_string(),
        }
    }
}

/// Everything the pipeline dropped, filled, or rewrote, for the prep report.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct PrepReport {
    pub sparse_dropped: Vec<SparseDrop>,
    pub imputations: Vec<Imputation>,
    pub correlation_dropped: Vec<CorrelationDrop>,
    pub chi_square: Vec<ChiSquareResult>,
    pub degenerate_columns: Vec<String>,
    pub rows_removed_by_status: usize,
    pub grades_clubbed: bool,
    pub encoder: Option<EncoderMap>,
}

/// Run the preprocessing steps in pipeline order and one-hot encode the
/// survivors. The chi-square filter needs the binary target, so
/// binarization happens right after the sparsity pass.
pub fn preprocess(data: Dataset, cfg: &PrepConfig) -> Result<(EncodedMatrix, PrepReport), DataError> {
    let mut report = PrepReport::default();

    let (data, sparse_dropped, imputations) = drop_sparse_columns(&data, cfg.sparse_threshold)?;
    report.sparse_dropped = sparse_dropped;
    report.imputations = imputations;

    let (data, removed) = binarize_target(&data)?;
    report.rows_removed_by_status = removed;

    let (data, corr_dropped) = filter_correlated(&data, cfg.corr_max);
    report.correlation_dropped = corr_dropped;

    let (data, chi, degenerate) = filter_chi_square(&data, cfg.chi_alpha)?;
    report.chi_square = chi;
    report.degenerate_columns = degenerate;

    let data = if data.column_index(&cfg.grade_column).is_some() {
        report.grades_clubbed = true;
        club_grades(&data, &cfg.grade_column)?
    } else {
        data
    };

    let encoded = one_hot_encode(&data)?;
    report.encoder = Some(encoded.encoder.clone());
    Ok((encoded, report))
}
