use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// One synchronized sample: stream name to its value vector.
pub type Sample = BTreeMap<String, Vec<f64>>;

/// Synchronized scalar streams, one column per stream, one row per time step.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamTable {
    names: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl StreamTable {
    pub fn new(names: Vec<String>) -> Result<Self> {
        for (i, n) in names.iter().enumerate() {
            if n.is_empty() {
                return Err(Error::Configuration("empty stream name".into()));
            }
            if names[..i].contains(n) {
                return Err(Error::Configuration(format!("duplicate stream name `{n}`")));
            }
        }
        Ok(StreamTable { names, rows: Vec::new() })
    }

    pub fn with_rows(names: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let mut t = StreamTable::new(names)?;
        for r in rows {
            t.push(r)?;
        }
        Ok(t)
    }

    pub fn push(&mut self, row: Vec<f64>) -> Result<()> {
        if row.len() != self.names.len() {
            return Err(Error::Structural(format!(
                "row has {} values for {} streams",
                row.len(),
                self.names.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.column_index(name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    /// Rows `range` as a new table.
    pub fn slice(&self, range: std::ops::Range<usize>) -> StreamTable {
        StreamTable { names: self.names.clone(), rows: self.rows[range].to_vec() }
    }
}
