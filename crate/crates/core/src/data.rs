//! In-memory tabular data with per-column type tags.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ColumnKind {
    Continuous,
    Ordinal,
}

/// Rows of numeric values with named, typed columns and an optional response.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    names: Vec<String>,
    kinds: Vec<ColumnKind>,
    rows: Vec<Vec<f64>>,
    response: Option<usize>,
}

/// Integer-valued columns with at most this many distinct values are ordinal
/// unless stated otherwise.
pub const ORDINAL_MAX_LEVELS: usize = 10;

impl Dataset {
    pub fn new(names: Vec<String>, kinds: Vec<ColumnKind>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let d = names.len();
        if d == 0 {
            return Err(Error::Input("dataset has no columns".into()));
        }
        if kinds.len() != d {
            return Err(Error::Input(format!("{} kinds for {d} columns", kinds.len())));
        }
        for (i, r) in rows.iter().enumerate() {
            if r.len() != d {
                return Err(Error::Schema(format!("row {} has {} values, expected {d}", i + 1, r.len())));
            }
            if let Some(j) = r.iter().position(|x| !x.is_finite()) {
                return Err(Error::Input(format!("row {}: non-finite value in column {}", i + 1, names[j])));
            }
        }
        for (j, k) in kinds.iter().enumerate() {
            if *k == ColumnKind::Ordinal && rows.iter().any(|r| r[j].fract() != 0.0) {
                return Err(Error::Input(format!("ordinal column {} has non-integer values", names[j])));
            }
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = names.iter().find(|n| !seen.insert(n.as_str())) {
            return Err(Error::Input(format!("duplicate column name {dup}")));
        }
        Ok(Self { names, kinds, rows, response: None })
    }

    /// Tag each column by inspecting its values.
    pub fn infer(names: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let d = names.len();
        let kinds = (0..d)
            .map(|j| {
                let mut vals: Vec<f64> = rows.iter().filter_map(|r| r.get(j).copied()).collect();
                let integer = vals.iter().all(|x| x.fract() == 0.0);
                vals.sort_by(f64::total_cmp);
                vals.dedup();
                if integer && !vals.is_empty() && vals.len() <= ORDINAL_MAX_LEVELS {
                    ColumnKind::Ordinal
                } else {
                    ColumnKind::Continuous
                }
            })
            .collect();
        Self::new(names, kinds, rows)
    }

    pub fn with_response(mut self, name: &str) -> Result<Self> {
        let j = self.index_of(name)?;
        self.response = Some(j);
        Ok(self)
    }

    pub fn with_kind(mut self, name: &str, kind: ColumnKind) -> Result<Self> {
        let j = self.index_of(name)?;
        self.kinds[j] = kind;
        let names = std::mem::take(&mut self.names);
        let response = self.response;
        let mut out = Self::new(names, self.kinds, self.rows)?;
        out.response = response;
        Ok(out)
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::Schema(format!("no column named {name}")))
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn kinds(&self) -> &[ColumnKind] {
        &self.kinds
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn response(&self) -> Option<usize> {
        self.response
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.names.len()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }

    /// Column indices other than the response.
    pub fn predictors(&self) -> Vec<usize> {
        (0..self.n_cols()).filter(|&j| Some(j) != self.response).collect()
    }

    /// The rows at the given indices, in that order.
    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            names: self.names.clone(),
            kinds: self.kinds.clone(),
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
            response: self.response,
        }
    }

    /// The given columns, in that order. The response is kept if selected.
    pub fn select_columns(&self, cols: &[usize]) -> Self {
        Self {
            names: cols.iter().map(|&j| self.names[j].clone()).collect(),
            kinds: cols.iter().map(|&j| self.kinds[j]).collect(),
            rows: self.rows.iter().map(|r| cols.iter().map(|&j| r[j]).collect()).collect(),
            response: self.response.and_then(|y| cols.iter().position(|&j| j == y)),
        }
    }
}
