//! Run directories: schema-tagged CSV tables, JSON summaries and the manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// First line of every CSV file.
pub fn schema_line(kind: &str) -> String {
    format!("# schema: blacksol/{kind}/v{SCHEMA_VERSION}")
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(u64),
    Null,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Null, Cell::Float)
    }
}

fn push_cell(out: &mut String, cell: &Cell) {
    match cell {
        Cell::Float(v) if v.is_finite() => write!(out, "{v:.12e}").unwrap(),
        Cell::Float(v) => write!(out, "{v}").unwrap(),
        Cell::Int(v) => write!(out, "{v}").unwrap(),
        Cell::Null => out.push_str("null"),
    }
}

/// In-memory CSV table; rows are written in insertion order.
#[derive(Debug, Clone)]
pub struct Table {
    kind: String,
    columns: Vec<String>,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(kind: &str, columns: &[&str]) -> Self {
        Table {
            kind: kind.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width for {}", self.kind);
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn render(&self) -> String {
        let mut out = schema_line(&self.kind);
        out.push('\n');
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            for (i, cell) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                push_cell(&mut out, cell);
            }
            out.push('\n');
        }
        out
    }
}

/// Output directory of one command invocation.
#[derive(Debug)]
pub struct RunDir {
    root: PathBuf,
    files: Vec<String>,
    started: Instant,
    started_unix: u64,
}

impl RunDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(RunDir {
            root: root.to_path_buf(),
            files: Vec::new(),
            started: Instant::now(),
            started_unix: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        })
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<PathBuf, CliError> {
        let path = self.root.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        self.files.push(name.to_string());
        Ok(path)
    }

    pub fn write_table(&mut self, name: &str, table: &Table) -> Result<PathBuf, CliError> {
        self.write_text(name, &table.render())
    }

    pub fn write_json(&mut self, name: &str, value: &impl Serialize) -> Result<PathBuf, CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Serialize(e.to_string()))?;
        text.push('\n');
        self.write_text(name, &text)
    }

    /// Writes manifest.json, the only file carrying wall-clock data.
    pub fn finish(mut self, command: &str, config_name: &str, seed: u64, passed: bool) -> Result<PathBuf, CliError> {
        let manifest = Manifest {
            command: command.to_string(),
            name: config_name.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            schema_version: SCHEMA_VERSION,
            seed,
            started_unix: self.started_unix,
            wall_clock_seconds: self.started.elapsed().as_secs_f64(),
            passed,
            files: self.files.clone(),
        };
        self.write_json(MANIFEST, &manifest)
    }
}

pub const MANIFEST: &str = "manifest.json";
pub const RESOLVED_CONFIG: &str = "config.resolved.toml";

#[derive(Debug, Serialize)]
struct Manifest {
    command: String,
    name: String,
    version: String,
    schema_version: u32,
    seed: u64,
    started_unix: u64,
    wall_clock_seconds: f64,
    passed: bool,
    files: Vec<String>,
}
