//! CSV tables with a JSON metadata sidecar.

use std::path::{Path, PathBuf};

use qrotor::Params;
use serde::Serialize;
use serde_json::Value;

use crate::CliError;

/// Scientific notation, 12 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.11e}")
    }
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// Rows are stored as already formatted fields.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("CSV fields are UTF-8"))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Metadata<'a> {
    pub command: &'a str,
    pub version: &'static str,
    pub params: &'a Params,
    pub settings: Value,
    pub summary: Value,
    pub warnings: Vec<String>,
}

/// `out.csv` → `out.csv.meta.json`
pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

pub fn write_outputs(out: &Path, table: &Table, meta: &Metadata) -> Result<(), CliError> {
    std::fs::write(out, table.to_csv()?).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
    let side = sidecar_path(out);
    let json = serde_json::to_string_pretty(meta).expect("metadata serializes");
    std::fs::write(&side, json + "\n").map_err(|e| CliError::Io(format!("{}: {e}", side.display())))
}
