//! Numeric CSV input for the regression commands: the first column is the
//! response `y`, the remaining columns form the design matrix `X`.
//!
//! A leading header row is skipped when any of its fields fails to parse as a
//! number. Blank lines and lines starting with `#` are ignored.

use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

#[derive(Debug, Clone)]
pub struct Dataset {
    pub y: Vec<f64>,
    pub x: DenseMatrix,
    pub header: Option<Vec<String>>,
}

pub fn parse_csv(bytes: &[u8]) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(bytes);

    let mut header = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (idx, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(idx + 1, |p| p.line() as usize);
            Error::parse(line, e.to_string())
        })?;
        let line = rec.position().map_or(idx + 1, |p| p.line() as usize);
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        let values = match parsed {
            Ok(v) => v,
            Err(_) if rows.is_empty() && header.is_none() => {
                header = Some(rec.iter().map(str::to_owned).collect());
                continue;
            }
            Err(e) => return Err(Error::parse(line, format!("invalid number: {e}"))),
        };
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::parse(
                line,
                format!("non-finite value in column {}", bad + 1),
            ));
        }
        match width {
            None => {
                if values.len() < 2 {
                    return Err(Error::parse(
                        line,
                        "need a response column and at least one regressor",
                    ));
                }
                width = Some(values.len());
            }
            Some(w) if w != values.len() => {
                return Err(Error::parse(
                    line,
                    format!("expected {w} fields, found {}", values.len()),
                ));
            }
            _ => {}
        }
        rows.push(values);
    }
    let w = width.ok_or_else(|| Error::parse(1, "no data rows"))?;
    let n = rows.len();
    let y = rows.iter().map(|r| r[0]).collect();
    let mut data = Vec::with_capacity(n * (w - 1));
    for j in 1..w {
        data.extend(rows.iter().map(|r| r[j]));
    }
    let x = DenseMatrix::from_col_major(n, w - 1, data)?;
    Ok(Dataset { y, x, header })
}

pub fn read_csv(path: &Path) -> Result<Dataset> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&bytes)
}
