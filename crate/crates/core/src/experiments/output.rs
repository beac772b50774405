//! Result tables, run manifests and their CSV/JSON encodings.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::{Config, Format};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Str(String),
    Int(i64),
    Float(f64),
    Bool(bool),
    Empty,
}

impl Cell {
    /// CSV text: floats carry 17 significant digits.
    pub fn csv(&self) -> String {
        match self {
            Cell::Str(s) => s.clone(),
            Cell::Int(i) => i.to_string(),
            Cell::Float(v) => format!("{v:.16e}"),
            Cell::Bool(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> serde_json::Value {
        use serde_json::Value;
        match self {
            Cell::Str(s) => Value::String(s.clone()),
            Cell::Int(i) => Value::from(*i),
            Cell::Float(v) => serde_json::Number::from_f64(*v).map_or(Value::Null, Value::Number),
            Cell::Bool(b) => Value::Bool(*b),
            Cell::Empty => Value::Null,
        }
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Str(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Str(s)
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

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Empty, Into::into)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        let io = |e: csv::Error| Error::Io { path: "<csv buffer>".into(), source: std::io::Error::other(e) };
        w.write_record(&self.columns).map_err(io)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::csv)).map_err(io)?;
        }
        w.into_inner().map_err(|e| Error::Io { path: "<csv buffer>".into(), source: std::io::Error::other(e.to_string()) })
    }

    /// Top-level array with one object per row, each embedding the manifest.
    pub fn to_json(&self, manifest: &RunManifest) -> Result<Vec<u8>> {
        let m = serde_json::to_value(manifest).map_err(|e| Error::Config(e.to_string()))?;
        let rows: Vec<serde_json::Value> = self
            .rows
            .iter()
            .map(|row| {
                let mut obj = serde_json::Map::new();
                for (c, v) in self.columns.iter().zip(row) {
                    obj.insert(c.clone(), v.json());
                }
                obj.insert("manifest".into(), m.clone());
                serde_json::Value::Object(obj)
            })
            .collect();
        let mut out = serde_json::to_vec_pretty(&rows).map_err(|e| Error::Config(e.to_string()))?;
        out.push(b'\n');
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunManifest {
    pub experiment: String,
    pub config_hash: String,
    pub seed: u64,
    pub threads: usize,
    pub timestamp: String,
    pub outputs: Vec<PathBuf>,
    pub code_version: String,
    pub wallclock_s: f64,
    /// Experiment-level findings (fits, gates, references).
    pub summary: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(config: &Config, threads: usize) -> Self {
        RunManifest {
            experiment: config.experiment.name().to_string(),
            config_hash: config.hash(),
            seed: config.seed,
            threads,
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            outputs: Vec::new(),
            code_version: concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION")).to_string(),
            wallclock_s: 0.0,
            summary: BTreeMap::new(),
        }
    }
}

/// `<path>.manifest.json`
pub fn manifest_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let io = |source| Error::Io { path: path.display().to_string(), source };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    let mut f = std::fs::File::create(path).map_err(io)?;
    f.write_all(bytes).map_err(io)
}

/// Writes the table at `path` in `format` and the manifest alongside.
pub fn write_results(table: &Table, manifest: &mut RunManifest, path: &Path, format: Format) -> Result<()> {
    let mpath = manifest_path(path);
    manifest.outputs = vec![path.to_path_buf(), mpath.clone()];
    let body = match format {
        Format::Csv => table.to_csv()?,
        Format::Json => table.to_json(manifest)?,
    };
    write_file(path, &body)?;
    let mut m = serde_json::to_vec_pretty(manifest).map_err(|e| Error::Config(e.to_string()))?;
    m.push(b'\n');
    write_file(&mpath, &m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::config::ExperimentKind;

    #[test]
    fn csv_round_trips_doubles() {
        let mut t = Table::new(&["a", "b", "c"]);
        let v = 0.1 + 0.2;
        t.push(vec!["x".into(), v.into(), Cell::Empty]);
        let text = String::from_utf8(t.to_csv().unwrap()).unwrap();
        assert!(text.starts_with("a,b,c\n"));
        let field = text.lines().nth(1).unwrap().split(',').nth(1).unwrap();
        assert_eq!(field.parse::<f64>().unwrap(), v);
        assert!(text.ends_with(",\n"));
    }

    #[test]
    fn json_embeds_manifest() {
        let mut t = Table::new(&["x", "estimate"]);
        t.push(vec![1000u64.into(), f64::NAN.into()]);
        let m = RunManifest::new(&Config::new(ExperimentKind::Moments), 1);
        let v: serde_json::Value = serde_json::from_slice(&t.to_json(&m).unwrap()).unwrap();
        let row = &v.as_array().unwrap()[0];
        assert_eq!(row["x"], 1000);
        assert!(row["estimate"].is_null());
        assert_eq!(row["manifest"]["experiment"], "moments");
    }

    #[test]
    fn manifest_sits_alongside() {
        assert_eq!(manifest_path(Path::new("out/m.csv")), PathBuf::from("out/m.csv.manifest.json"));
    }
}
