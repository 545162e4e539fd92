use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use crate::data::{ColumnKind, Dataset};
use crate::error::{Error, Result};

/// Tokens read as missing values.
const MISSING: [&str; 5] = ["", "na", "nan", "null", "?"];

/// A CSV parsed into a dataset plus ingestion warnings.
#[derive(Debug, Clone)]
pub struct CsvData {
    pub dataset: Dataset,
    pub warnings: Vec<String>,
}

/// Read a headed numeric CSV. Rows with missing cells are dropped; column
/// kinds are inferred unless overridden.
pub fn read_csv_from<R: Read>(reader: R, kinds: &BTreeMap<String, ColumnKind>) -> Result<CsvData> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let names: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if names.is_empty() || names.iter().all(String::is_empty) {
        return Err(Error::Schema("CSV header row is missing".into()));
    }
    let mut rows = Vec::new();
    let mut dropped = 0usize;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != names.len() {
            return Err(Error::Schema(format!("line {} has {} fields, header has {}", i + 2, rec.len(), names.len())));
        }
        let mut row = Vec::with_capacity(names.len());
        let mut missing = false;
        for (j, cell) in rec.iter().enumerate() {
            if MISSING.contains(&cell.to_ascii_lowercase().as_str()) {
                missing = true;
                continue;
            }
            let v: f64 = cell
                .parse()
                .map_err(|_| Error::Input(format!("line {}: column {} value '{cell}' is not numeric", i + 2, names[j])))?;
            if !v.is_finite() {
                missing = true;
            }
            row.push(v);
        }
        if missing {
            dropped += 1;
        } else {
            rows.push(row);
        }
    }
    let mut warnings = Vec::new();
    if dropped > 0 {
        warnings.push(format!("dropped {dropped} rows with missing values"));
    }
    if rows.is_empty() {
        return Err(Error::DegenerateData("no complete rows".into()));
    }
    let mut ds = Dataset::infer(names, rows)?;
    for (name, kind) in kinds {
        ds = ds.with_kind(name, *kind)?;
    }
    Ok(CsvData { dataset: ds, warnings })
}

pub fn read_csv(path: &Path, kinds: &BTreeMap<String, ColumnKind>) -> Result<CsvData> {
    let f = std::fs::File::open(path).map_err(|e| Error::Input(format!("cannot open {}: {e}", path.display())))?;
    read_csv_from(std::io::BufReader::new(f), kinds)
}

/// Write a header and numeric rows. `{}` formatting of f64 is the shortest
/// string that parses back to the same value.
pub fn write_table_to<W: Write>(writer: W, header: &[String], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(header)?;
    for r in rows {
        w.write_record(r.iter().map(|v| format!("{v}")))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_table(path: &Path, header: &[String], rows: &[Vec<f64>]) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_table_to(std::io::BufWriter::new(f), header, rows)
}

pub fn write_csv(path: &Path, ds: &Dataset) -> Result<()> {
    write_table(path, ds.names(), ds.rows())
}
