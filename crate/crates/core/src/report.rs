//! CSV tables and JSON summaries.
//!
//! Every number is formatted explicitly so that equal inputs give equal
//! bytes. Nothing time-dependent goes into either format.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::Result;

/// One line of the JSON summary: `{check, params, value, stderr, pass}`.
/// Non-finite numbers serialize as `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub check: String,
    pub params: Value,
    pub value: f64,
    pub stderr: f64,
    pub pass: bool,
}

impl Summary {
    pub fn new(check: impl Into<String>, params: Value, value: f64, stderr: f64, pass: bool) -> Self {
        Self {
            check: check.into(),
            params,
            value,
            stderr,
            pass,
        }
    }
}

pub fn summaries_to_json(summaries: &[Summary]) -> Result<String> {
    let mut s = serde_json::to_string_pretty(summaries)?;
    s.push('\n');
    Ok(s)
}

/// A CSV table held in memory.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Self {
            header: header.iter().map(|s| s.as_ref().to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push<I, S>(&mut self, row: I)
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let row: Vec<String> = row.into_iter().map(Into::into).collect();
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(w.into_inner().map_err(|e| e.into_error())?)
    }

    pub fn write_to(&self, mut out: impl Write) -> Result<()> {
        out.write_all(&self.to_bytes()?)?;
        Ok(())
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(path, self.to_bytes()?)?;
        Ok(())
    }
}

/// `{:.12e}` for values, the plain shortest form for parameters.
pub fn num(x: f64) -> String {
    format!("{x:.12e}")
}

pub fn param(x: f64) -> String {
    format!("{x}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn summary_schema() {
        let s = Summary::new("k2", json!({"beta": 0.5}), 0.25, f64::NAN, true);
        let v: Value = serde_json::from_str(&summaries_to_json(&[s]).unwrap()).unwrap();
        let obj = v[0].as_object().unwrap();
        let mut keys: Vec<&str> = obj.keys().map(String::as_str).collect();
        keys.sort_unstable();
        assert_eq!(keys, ["check", "params", "pass", "stderr", "value"]);
        assert!(obj["stderr"].is_null());
    }

    #[test]
    fn csv_bytes_are_stable() {
        let mut t = CsvTable::new(&["a", "b"]);
        t.push([num(0.1), param(2.0)]);
        t.push(["x,y".to_string(), "z".to_string()]);
        let b = t.to_bytes().unwrap();
        assert_eq!(String::from_utf8(b.clone()).unwrap(), "a,b\n1.000000000000e-1,2\n\"x,y\",z\n");
        assert_eq!(b, t.to_bytes().unwrap());
    }
}
