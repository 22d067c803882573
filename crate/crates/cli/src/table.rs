//! Result tables: CSV with a comment header plus a lossless JSON mirror.

use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            // Debug formatting is shortest-round-trip and always keeps a
            // decimal point, so whole floats stay distinguishable from ints.
            Cell::Float(v) => format!("{v:?}"),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u32> for Cell {
    fn from(v: u32) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub name: String,
    /// Reproducibility header: build id, seeds, parameters.
    pub meta: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl ResultTable {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        let mut meta = Vec::new();
        meta.push(("tool".to_string(), format!("lowdelay {}", env!("CARGO_PKG_VERSION"))));
        meta.push(("build".to_string(), env!("LOWDELAY_BUILD_ID").to_string()));
        ResultTable {
            name: name.to_string(),
            meta,
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn meta(&mut self, key: &str, value: impl ToString) {
        self.meta.push((key.to_string(), value.to_string()));
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width mismatch");
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.meta {
            let _ = writeln!(out, "# {k}: {v}");
        }
        let _ = writeln!(out, "{}", self.columns.join(","));
        for row in &self.rows {
            let rendered: Vec<String> = row.iter().map(Cell::render).collect();
            let _ = writeln!(out, "{}", rendered.join(","));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes")
    }

    /// Parse the CSV body (comments skipped) back into (columns, rows) with
    /// the same cell typing rules; used to assert the mirror stays lossless.
    pub fn parse_csv_body(csv: &str) -> (Vec<String>, Vec<Vec<Cell>>) {
        let mut lines = csv.lines().filter(|l| !l.starts_with('#') && !l.is_empty());
        let columns: Vec<String> = lines
            .next()
            .map(|h| h.split(',').map(|c| c.to_string()).collect())
            .unwrap_or_default();
        let rows = lines
            .map(|line| {
                line.split(',')
                    .map(|cell| {
                        if let Ok(v) = cell.parse::<i64>() {
                            Cell::Int(v)
                        } else if let Ok(v) = cell.parse::<f64>() {
                            Cell::Float(v)
                        } else {
                            Cell::Text(cell.to_string())
                        }
                    })
                    .collect()
            })
            .collect();
        (columns, rows)
    }

    /// Write `<dir>/<name>.csv` and `<dir>/<name>.json`.
    pub fn write_to(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(format!("{}.csv", self.name)), self.to_csv())?;
        std::fs::write(dir.join(format!("{}.json", self.name)), self.to_json())?;
        Ok(())
    }
}
