use std::path::Path;

use super::DataMatrix;
use crate::{Error, Matrix, Result};

/// Loads a rectangular numeric CSV without a header row. With `has_labels`
/// the last column holds integer class labels and is removed from the
/// features. Errors carry the 1-based row number.
pub fn load_csv(path: impl AsRef<Path>, has_labels: bool) -> Result<DataMatrix> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, 0, e.to_string()))?;

    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut width: Option<usize> = None;
    let mut n = 0;
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| csv_error(path, row, e.to_string()))?;
        if width.is_some_and(|w| w != record.len()) {
            return Err(csv_error(
                path,
                row,
                format!("ragged row: {} fields, expected {}", record.len(), width.unwrap()),
            ));
        }
        width = Some(record.len());
        let features = if has_labels {
            let last = record.len().checked_sub(1).filter(|&f| f > 0).ok_or_else(|| {
                csv_error(path, row, "labelled rows need at least two fields".into())
            })?;
            labels.push(parse_label(&record[last]).ok_or_else(|| {
                csv_error(path, row, format!("label {:?} is not an integer", &record[last]))
            })?);
            last
        } else {
            record.len()
        };
        for (j, cell) in record.iter().take(features).enumerate() {
            let v: f64 = cell.parse().map_err(|_| {
                csv_error(path, row, format!("column {}: {cell:?} is not a number", j + 1))
            })?;
            if !v.is_finite() {
                return Err(csv_error(path, row, format!("column {}: non-finite value", j + 1)));
            }
            values.push(v);
        }
        n += 1;
    }
    let d = width.map_or(0, |w| if has_labels { w - 1 } else { w });
    if n == 0 {
        return Err(csv_error(path, 0, "no rows".into()));
    }
    let data = DataMatrix::from_matrix(Matrix::from_vec(n, d, values)?, path.display().to_string())?;
    if has_labels {
        data.with_labels(labels)
    } else {
        Ok(data)
    }
}

fn parse_label(s: &str) -> Option<i64> {
    s.parse::<i64>().ok().or_else(|| {
        let f: f64 = s.parse().ok()?;
        (f.fract() == 0.0 && f.abs() < 9.0e15).then_some(f as i64)
    })
}

fn csv_error(path: &Path, row: usize, message: String) -> Error {
    Error::Csv {
        path: path.to_path_buf(),
        row,
        message,
    }
}
