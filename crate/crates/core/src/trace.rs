//! Per-iteration metric records.

use crate::error::{Error, Result};

/// A table of per-iteration metrics with a fixed column set.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    columns: Vec<String>,
    rows: Vec<(u64, Vec<f64>)>,
    metadata: Vec<(String, String)>,
}

impl Trace {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Trace {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
            metadata: Vec::new(),
        }
    }

    /// Append a record. Iterations must be strictly increasing and every
    /// record must carry one value per column.
    pub fn push(&mut self, iter: u64, values: Vec<f64>) -> Result<()> {
        if values.len() != self.columns.len() {
            return Err(Error::shape(
                format!("{} trace values", self.columns.len()),
                values.len(),
            ));
        }
        if let Some((last, _)) = self.rows.last() {
            if iter <= *last {
                return Err(Error::InvalidConfig {
                    key: "iter".into(),
                    reason: format!("trace iterations must increase ({iter} after {last})"),
                });
            }
        }
        self.rows.push((iter, values));
        Ok(())
    }

    pub fn set_meta(&mut self, key: impl Into<String>, value: impl ToString) {
        let key = key.into();
        let value = value.to_string();
        match self.metadata.iter_mut().find(|(k, _)| *k == key) {
            Some(slot) => slot.1 = value,
            None => self.metadata.push((key, value)),
        }
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metadata
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn metadata(&self) -> &[(String, String)] {
        &self.metadata
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[(u64, Vec<f64>)] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// All values of a named column, in record order.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|(_, v)| v[j]).collect())
    }

    pub fn last(&self, name: &str) -> Option<f64> {
        let j = self.columns.iter().position(|c| c == name)?;
        self.rows.last().map(|(_, v)| v[j])
    }

    pub fn iters(&self) -> Vec<u64> {
        self.rows.iter().map(|(i, _)| *i).collect()
    }
}
