//! The preprocessing passes: sparsity filter with imputation, numeric
//! correlation filter, categorical chi-square filter, grade clubbing, and
//! target binarization.

use super::{Cell, ColumnKind, DataError, Dataset};
use crate::util::stats;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SparseDrop {
    pub column: String,
    pub missing_fraction: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Imputation {
    pub column: String,
    pub cells: usize,
    pub fill: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CorrelationDrop {
    pub kept: String,
    pub dropped: String,
    pub r: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChiSquareResult {
    pub column: String,
    pub statistic: f64,
    pub p_value: f64,
    pub dropped: bool,
}

fn retain_columns(data: &Dataset, keep: &[bool]) -> Dataset {
    let mut out = Dataset {
        column_names: Vec::new(),
        column_kinds: Vec::new(),
        rows: vec![Vec::new(); data.n_rows()],
        target: data.target.clone(),
    };
    for (j, &k) in keep.iter().enumerate() {
        if k {
            out.column_names.push(data.column_names[j].clone());
            out.column_kinds.push(data.column_kinds[j]);
            for (r, row) in data.rows.iter().enumerate() {
                out.rows[r].push(row[j].clone());
            }
        }
    }
    out
}

/// Drop every non-target column whose missing fraction strictly exceeds
/// `threshold`, then fill the remaining holes: numeric columns with their
/// median, categorical with their mode (lexicographically smallest on ties).
pub fn drop_sparse_columns(
    data: &Dataset,
    threshold: f64,
) -> Result<(Dataset, Vec<SparseDrop>, Vec<Imputation>), DataError> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(DataError::InvalidParam(format!(
            "sparsity threshold must be in (0, 1], got {threshold}"
        )));
    }
    let n = data.n_rows();
    let mut keep = vec![true; data.n_cols()];
    let mut dropped = Vec::new();
    for j in 0..data.n_cols() {
        if data.column_kinds[j] == ColumnKind::Target {
            continue;
        }
        let missing = data.column_cells(j).filter(|c| c.is_missing()).count();
        let fraction = if n == 0 { 0.0 } else { missing as f64 / n as f64 };
        if fraction > threshold {
            keep[j] = false;
            dropped.push(SparseDrop {
                column: data.column_names[j].clone(),
                missing_fraction: fraction,
            });
        }
    }
    if !keep
        .iter()
        .zip(&data.column_kinds)
        .any(|(&k, &kind)| k && kind != ColumnKind::Target)
    {
        return Err(DataError::AllColumnsDropped);
    }

    let mut out = retain_columns(data, &keep);
    let mut imputations = Vec::new();
    for j in 0..out.n_cols() {
        if out.column_kinds[j] == ColumnKind::Target {
            continue;
        }
        let holes = out.column_cells(j).filter(|c| c.is_missing()).count();
        if holes == 0 {
            continue;
        }
        let fill = match out.column_kinds[j] {
            ColumnKind::Numeric => {
                let present: Vec<f64> =
                    out.column_cells(j).filter_map(Cell::as_num).collect();
                let median = if present.is_empty() {
                    0.0
                } else {
                    stats::quantile(&present, 0.5)
                };
                Cell::Num(median)
            }
            ColumnKind::Categorical => {
                let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
                for cell in out.column_cells(j) {
                    if let Some(s) = cell.as_cat() {
                        *counts.entry(s).or_insert(0) += 1;
                    }
                }
                // BTreeMap order makes the tie-break lexicographic.
                let mode = counts
                    .iter()
                    .max_by_key(|(_, &c)| c)
                    .map(|(s, _)| s.to_string())
                    .unwrap_or_else(|| "unknown".to_string());
                Cell::Cat(mode)
            }
            ColumnKind::Target => unreachable!(),
        };
        imputations.push(Imputation {
            column: out.column_names[j].clone(),
            cells: holes,
            fill: match &fill {
                Cell::Num(v) => format!("{v}"),
                Cell::Cat(s) => s.clone(),
                Cell::Missing => unreachable!(),
            },
        });
        for row in &mut out.rows {
            if row[j].is_missing() {
                row[j] = fill.clone();
            }
        }
    }
    Ok((out, dropped, imputations))
}

/// For each numeric pair with |Pearson r| above `r_max`, drop the
/// later-declared column. Correlations use pairwise-complete rows.
pub fn filter_correlated(data: &Dataset, r_max: f64) -> (Dataset, Vec<CorrelationDrop>) {
    let numeric: Vec<usize> = (0..data.n_cols())
        .filter(|&j| data.column_kinds[j] == ColumnKind::Numeric)
        .collect();
    let mut keep = vec![true; data.n_cols()];
    let mut dropped = Vec::new();
    for (a, &i) in numeric.iter().enumerate() {
        if !keep[i] {
            continue;
        }
        for &j in &numeric[a + 1..] {
            if !keep[j] {
                continue;
            }
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for row in &data.rows {
                if let (Some(x), Some(y)) = (row[i].as_num(), row[j].as_num()) {
                    xs.push(x);
                    ys.push(y);
                }
            }
            if let Some(r) = stats::pearson(&xs, &ys) {
                if r.abs() > r_max {
                    keep[j] = false;
                    dropped.push(CorrelationDrop {
                        kept: data.column_names[i].clone(),
                        dropped: data.column_names[j].clone(),
                        r,
                    });
                }
            }
        }
    }
    (retain_columns(data, &keep), dropped)
}

/// Pearson chi-square test of each categorical column against the binary
/// target. Columns with p >= alpha are dropped; single-level columns are
/// dropped as degenerate.
pub fn filter_chi_square(
    data: &Dataset,
    alpha: f64,
) -> Result<(Dataset, Vec<ChiSquareResult>, Vec<String>), DataError> {
    let target = data.target.as_ref().ok_or(DataError::TargetNotBinarized)?;
    let mut keep = vec![true; data.n_cols()];
    let mut results = Vec::new();
    let mut degenerate = Vec::new();
    for j in 0..data.n_cols() {
        if data.column_kinds[j] != ColumnKind::Categorical {
            continue;
        }
        let mut table: BTreeMap<&str, [f64; 2]> = BTreeMap::new();
        for (row, &y) in data.rows.iter().zip(target) {
            if let Some(level) = row[j].as_cat() {
                table.entry(level).or_insert([0.0, 0.0])[y as usize] += 1.0;
            }
        }
        if table.len() < 2 {
            keep[j] = false;
            degenerate.push(data.column_names[j].clone());
            continue;
        }
        let (statistic, p_value) = chi_square_statistic(&table);
        let dropped = p_value >= alpha;
        if dropped {
            keep[j] = false;
        }
        results.push(ChiSquareResult {
            column: data.column_names[j].clone(),
            statistic,
            p_value,
            dropped,
        });
    }
    Ok((retain_columns(data, &keep), results, degenerate))
}

fn chi_square_statistic(table: &BTreeMap<&str, [f64; 2]>) -> (f64, f64) {
    let col_totals = table.values().fold([0.0, 0.0], |acc, row| {
        [acc[0] + row[0], acc[1] + row[1]]
    });
    let n: f64 = col_totals[0] + col_totals[1];
    let mut statistic = 0.0;
    for counts in table.values() {
        let row_total = counts[0] + counts[1];
        for c in 0..2 {
            let expected = row_total * col_totals[c] / n;
            if expected > 0.0 {
                let d = counts[c] - expected;
                statistic += d * d / expected;
            }
        }
    }
    let df = table.len() - 1;
    (statistic, stats::chi_square_p(statistic, df))
}

/// Remap grade levels E, F, G to D, leaving A-D untouched.
pub fn club_grades(data: &Dataset, grade_column: &str) -> Result<Dataset, DataError> {
    let j = data
        .column_index(grade_column)
        .ok_or_else(|| DataError::MissingColumn(grade_column.to_string()))?;
    let mut out = data.clone();
    for row in &mut out.rows {
        if let Cell::Cat(level) = &row[j] {
            let clubbed = match level.as_str() {
                "A" | "B" | "C" | "D" => continue,
                "E" | "F" | "G" => "D",
                other => return Err(DataError::UnknownLevel(other.to_string())),
            };
            row[j] = Cell::Cat(clubbed.to_string());
        }
    }
    Ok(out)
}

/// Map loan statuses onto {0, 1}: "Fully Paid" -> 0; "Default",
/// "Charged Off" (and its original "Charge-off" spelling) -> 1. Rows with
/// any other status are removed; the removal count is returned.
pub fn binarize_target(data: &Dataset) -> Result<(Dataset, usize), DataError> {
    let j = data
        .column_kinds
        .iter()
        .position(|k| *k == ColumnKind::Target)
        .ok_or_else(|| DataError::Schema("no target column declared".to_string()))?;

    let mut rows = Vec::new();
    let mut target = Vec::new();
    let mut removed = 0usize;
    for row in &data.rows {
        let label = match row[j].as_cat() {
            Some("Fully Paid") => Some(0u8),
            Some("Default") | Some("Charged Off") | Some("Charge-off") => Some(1u8),
            _ => None,
        };
        match label {
            Some(y) => {
                let mut cells = row.clone();
                cells.remove(j);
                rows.push(cells);
                target.push(y);
            }
            None => removed += 1,
        }
    }
    if rows.is_empty() {
        return Err(DataError::EmptyAfterFilter);
    }
    let mut column_names = data.column_names.clone();
    let mut column_kinds = data.column_kinds.clone();
    column_names.remove(j);
    column_kinds.remove(j);
    Ok((
        Dataset {
            column_names,
            column_kinds,
            rows,
            target: Some(target),
        },
        removed,
    ))
}
