//! CSV ingestion and emission. UTF-8, header row, comma-separated; an empty
//! cell means missing, and unparseable numerics are recorded as missing
//! rather than failing the load.

use super::{Cell, ColumnKind, DataError, Dataset, Schema};
use std::path::Path;

pub fn load_csv(path: &Path, schema: &Schema) -> Result<Dataset, DataError> {
    let file = std::fs::File::open(path)?;
    load_csv_reader(file, schema)
}

/// Parse CSV text already in memory.
pub fn load_csv_str(text: &str, schema: &Schema) -> Result<Dataset, DataError> {
    load_csv_reader(text.as_bytes(), schema)
}

fn load_csv_reader<R: std::io::Read>(source: R, schema: &Schema) -> Result<Dataset, DataError> {
    schema.validate()?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(source);

    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    for name in schema.0.keys() {
        if !headers.iter().any(|h| h == name) {
            return Err(DataError::MissingColumn(name.clone()));
        }
    }

    // Keep file column order; ignore columns the schema does not declare.
    let mut column_names = Vec::new();
    let mut column_kinds = Vec::new();
    let mut positions = Vec::new();
    for (pos, name) in headers.iter().enumerate() {
        if let Some(kind) = schema.kind_of(name) {
            column_names.push(name.clone());
            column_kinds.push(kind);
            positions.push(pos);
        }
    }

    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != headers.len() {
            return Err(DataError::RowWidthMismatch {
                row: line + 2, // 1-based, counting the header line
                expected: headers.len(),
                found: record.len(),
            });
        }
        let mut row = Vec::with_capacity(positions.len());
        for (&pos, kind) in positions.iter().zip(&column_kinds) {
            row.push(parse_cell(record.get(pos).unwrap_or(""), *kind));
        }
        rows.push(row);
    }

    Ok(Dataset {
        column_names,
        column_kinds,
        rows,
        target: None,
    })
}

fn parse_cell(raw: &str, kind: ColumnKind) -> Cell {
    let trimmed = raw.trim();
    if trimmed.is_empty() {
        return Cell::Missing;
    }
    match kind {
        ColumnKind::Numeric => match trimmed.parse::<f64>() {
            Ok(v) if v.is_finite() => Cell::Num(v),
            _ => Cell::Missing,
        },
        ColumnKind::Categorical | ColumnKind::Target => Cell::Cat(trimmed.to_string()),
    }
}

pub fn write_csv(data: &Dataset, path: &Path) -> Result<(), DataError> {
    std::fs::write(path, to_csv_string(data)?)?;
    Ok(())
}

pub fn to_csv_string(data: &Dataset) -> Result<String, DataError> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(&data.column_names)?;
    for row in &data.rows {
        let record: Vec<String> = row
            .iter()
            .map(|cell| match cell {
                Cell::Num(v) => format!("{v}"),
                Cell::Cat(s) => s.clone(),
                Cell::Missing => String::new(),
            })
            .collect();
        writer.write_record(&record)?;
    }
    let bytes = writer.into_inner().expect("csv buffer");
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}
