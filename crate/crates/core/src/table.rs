//! Helpers for the crate's `#`-commented CSV files.

use std::io::Read;

use crate::error::{Error, Result};

pub(crate) fn malformed(file: &str, line: usize, message: &str) -> Error {
    Error::Malformed { file: file.to_string(), line, message: message.to_string() }
}

pub(crate) fn num(rec: &csv::StringRecord, i: usize, file: &str, line: usize) -> Result<f64> {
    let field = rec.get(i).ok_or_else(|| malformed(file, line, "missing field"))?;
    match field.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(malformed(file, line, &format!("bad number '{field}' in column {}", i + 1))),
    }
}

pub(crate) fn int(rec: &csv::StringRecord, i: usize, file: &str, line: usize) -> Result<usize> {
    let field = rec.get(i).ok_or_else(|| malformed(file, line, "missing field"))?;
    field.trim().parse().map_err(|_| malformed(file, line, &format!("bad integer '{field}' in column {}", i + 1)))
}

/// Visits data rows of a `#`-commented CSV with a fixed header, passing 1-based file line numbers.
pub(crate) fn for_each_row<R: Read>(
    input: R,
    name: &str,
    header: &[&str],
    mut f: impl FnMut(usize, &csv::StringRecord) -> Result<()>,
) -> Result<()> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).flexible(true).from_reader(input);
    let h = r.headers().map_err(|e| malformed(name, 1, &e.to_string()))?.clone();
    let line = h.position().map_or(1, |p| p.line() as usize);
    if h.iter().collect::<Vec<_>>() != header {
        return Err(malformed(name, line, &format!("expected header {}", header.join(","))));
    }
    for rec in r.records() {
        let rec = rec.map_err(|e| malformed(name, e.position().map_or(0, |p| p.line() as usize), &e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != header.len() {
            return Err(malformed(name, line, &format!("expected {} fields, found {}", header.len(), rec.len())));
        }
        f(line, &rec)?;
    }
    Ok(())
}
