use std::path::{Path, PathBuf};

use crate::data::{ColumnKind, Dataset};
use crate::error::{Error, Result};

pub const ABALONE_ENV: &str = "ABALONE_DATA";
pub const ABALONE_COLUMNS: [&str; 8] = ["length", "diameter", "height", "whole", "shucked", "viscera", "shell", "rings"];
/// Male rows taller than this are treated as the two outliers.
pub const HEIGHT_CUTOFF: f64 = 0.4;
/// Rings above this value form the positive class.
pub const RINGS_THRESHOLD: f64 = 10.0;

/// `$ABALONE_DATA` if set, else `data/abalone.data` under `root`.
pub fn abalone_path(root: &Path) -> PathBuf {
    match std::env::var_os(ABALONE_ENV) {
        Some(p) => PathBuf::from(p),
        None => root.join("data").join("abalone.data"),
    }
}

/// Parse the UCI file (Sex first, Rings last, optional header), keep the
/// male rows and drop rows with Height above the cutoff.
pub fn parse_abalone(text: &str) -> Result<Dataset> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 9 {
            return Err(Error::Schema(format!("abalone line {} has {} fields, expected 9", i + 1, f.len())));
        }
        let vals: std::result::Result<Vec<f64>, _> = f[1..].iter().map(|s| s.parse::<f64>()).collect();
        let vals = match vals {
            Ok(v) => v,
            Err(_) if i == 0 => continue,
            Err(_) => return Err(Error::Input(format!("abalone line {} has a non-numeric measurement", i + 1))),
        };
        if f[0].eq_ignore_ascii_case("m") && vals[2] <= HEIGHT_CUTOFF {
            rows.push(vals);
        }
    }
    if rows.is_empty() {
        return Err(Error::DegenerateData("no male abalone rows".into()));
    }
    let names = ABALONE_COLUMNS.iter().map(|s| s.to_string()).collect();
    Dataset::new(names, vec![ColumnKind::Continuous; 8], rows)?.with_response("rings")
}

pub fn load_abalone(path: &Path) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Input(format!("abalone data not readable at {}: {e}", path.display())))?;
    parse_abalone(&text)
}
