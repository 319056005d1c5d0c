//! CSV tables and JSON summaries.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde_json::{json, Map, Value};

/// A column name with the description written to the summary schema.
pub type Column = (&'static str, &'static str);

/// Rows of pre-formatted cells. Floats go through [`num`] so that the text is
/// the shortest round-trip form and therefore stable across runs.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: &'static [Column],
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &'static [Column]) -> Self {
        Table {
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> anyhow::Result<Vec<u8>> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::CRLF)
            .from_writer(Vec::new());
        w.write_record(self.columns.iter().map(|c| c.0))?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        Ok(w.into_inner()?)
    }

    pub fn schema(&self) -> Value {
        Value::Array(
            self.columns
                .iter()
                .map(|(name, description)| json!({ "name": name, "description": description }))
                .collect(),
        )
    }
}

/// Shortest round-trip text; exponent form outside `[1e-5, 1e16)`.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || !a.is_finite() || (1e-5..1e16).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Value for JSON: non-finite numbers become strings instead of `null`.
pub fn jnum(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        json!(format!("{x}"))
    }
}

/// Everything a finished experiment produced.
#[derive(Debug, Clone)]
pub struct Report {
    pub experiment: &'static str,
    pub table: Table,
    pub results: Map<String, Value>,
    /// The experiment's own pass flag, if it has one.
    pub passed: Option<bool>,
}

pub struct Written {
    pub csv: PathBuf,
    pub summary: PathBuf,
}

/// Writes `<experiment>.csv` and `<experiment>.summary.json` into `dir`.
pub fn write_report(dir: &Path, report: &Report, seed: u64, threads: usize) -> anyhow::Result<Written> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let csv_path = dir.join(format!("{}.csv", report.experiment));
    let summary_path = dir.join(format!("{}.summary.json", report.experiment));
    fs::write(&csv_path, report.table.to_csv()?).with_context(|| format!("writing {}", csv_path.display()))?;
    let summary = json!({
        "experiment": report.experiment,
        "seed": seed,
        "threads": threads,
        "csv": csv_path.file_name().map(|n| n.to_string_lossy().into_owned()),
        "rows": report.table.rows.len(),
        "schema": report.table.schema(),
        "passed": report.passed,
        "results": Value::Object(report.results.clone()),
    });
    fs::write(&summary_path, serde_json::to_string_pretty(&summary)? + "\n")
        .with_context(|| format!("writing {}", summary_path.display()))?;
    Ok(Written {
        csv: csv_path,
        summary: summary_path,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const COLS: &[Column] = &[("a", "first"), ("b", "second")];

    #[test]
    fn csv_quotes_and_crlf() {
        let mut t = Table::new(COLS);
        t.push(vec![num(0.1), "x, \"y\"".into()]);
        let text = String::from_utf8(t.to_csv().unwrap()).unwrap();
        assert_eq!(text, "a,b\r\n0.1,\"x, \"\"y\"\"\"\r\n");
        assert_eq!(t.schema()[1]["name"], "b");
    }

    #[test]
    fn numbers_round_trip() {
        for x in [1.0 / 3.0, 1e-300, 2.5e17, -0.0] {
            assert_eq!(num(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
        assert_eq!(num(2f64.powi(-128)), "2.938735877055719e-39");
        assert_eq!(num(0.25), "0.25");
        assert_eq!(jnum(f64::INFINITY), json!("inf"));
    }
}
