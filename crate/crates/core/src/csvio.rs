//! Headerless numeric CSV matrices.

use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Reads a rectangular matrix of finite reals. Rows and columns in errors are 1-based.
pub fn read_matrix(path: &Path) -> Result<Tensor> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;

    let parse_err = |row: usize, col: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        row,
        col,
        msg,
    };

    let mut data = Vec::new();
    let mut width = None;
    let mut rows = 0;
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let row = r + 1;
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(parse_err(
                    row,
                    record.len().min(w) + 1,
                    format!("expected {w} columns, found {}", record.len()),
                ));
            }
            Some(_) => {}
        }
        for (c, cell) in record.iter().enumerate() {
            let v: f64 = cell
                .parse()
                .map_err(|_| parse_err(row, c + 1, format!("not a number: {cell:?}")))?;
            if !v.is_finite() {
                return Err(parse_err(row, c + 1, format!("non-finite value {cell:?}")));
            }
            data.push(v);
        }
        rows += 1;
    }
    let cols = width.unwrap_or(0);
    if rows == 0 || cols == 0 {
        return Err(parse_err(1, 1, "empty matrix".into()));
    }
    Tensor::new(rows, cols, data)
}

/// Writes a matrix as headerless CSV using shortest round-trip float formatting.
pub fn write_matrix(path: &Path, m: &Tensor) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for r in 0..m.rows() {
        w.write_record(m.row(r).iter().map(|v| v.to_string()))
            .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let row = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse {
            path: path.to_path_buf(),
            row,
            col: 0,
            msg: format!("{other:?}"),
        },
    }
}
