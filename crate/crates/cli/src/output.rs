//! Artifact rendering. Everything here is a pure function of the report and
//! the config, so equal inputs give byte-identical files.

use std::fmt::Write as _;

use serde::Serialize;

use crate::config::ExperimentConfig;

pub const TOOL: &str = "inghamlab";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Real(f64),
    Flag(bool),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Real(v)
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
        Cell::Flag(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

/// 17 significant digits, so a reader recovers the exact double.
pub fn format_real(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Real(v) => format_real(*v),
            Cell::Flag(v) => v.to_string(),
            Cell::Text(s) => quote(s),
        }
    }

    /// Comment lines need no quoting.
    fn render_meta(&self) -> String {
        match self {
            Cell::Text(s) => s.replace('\n', " "),
            other => other.render(),
        }
    }
}

fn quote(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// One CSV block: `# key: value` lines, a header row, data rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub title: String,
    pub meta: Vec<(String, Cell)>,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(title: impl Into<String>, columns: Vec<&'static str>) -> Self {
        Self { title: title.into(), meta: Vec::new(), columns, rows: Vec::new() }
    }

    pub fn meta(mut self, key: &str, value: impl Into<Cell>) -> Self {
        self.meta.push((key.to_string(), value.into()));
        self
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub tables: Vec<Table>,
    /// Structured results for JSON output.
    pub results: serde_json::Value,
}

fn header(config: &ExperimentConfig) -> String {
    format!(
        "# {TOOL} {VERSION}\n# command: {}\n# seed: {}\n# config: {}\n",
        config.command,
        config.seed,
        config.echo()
    )
}

pub fn render_csv(config: &ExperimentConfig, report: &Report) -> String {
    let mut out = header(config);
    for table in &report.tables {
        out.push('\n');
        let _ = writeln!(out, "# table: {}", table.title);
        for (k, v) in &table.meta {
            let _ = writeln!(out, "# {k}: {}", v.render_meta());
        }
        out.push_str(&table.columns.join(","));
        out.push('\n');
        for row in &table.rows {
            let cells: Vec<String> = row.iter().map(Cell::render).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
    }
    out
}

#[derive(Serialize)]
struct JsonArtifact<'a> {
    tool: &'static str,
    version: &'static str,
    command: String,
    seed: u64,
    config: &'a ExperimentConfig,
    results: &'a serde_json::Value,
}

pub fn render_json(config: &ExperimentConfig, report: &Report) -> String {
    let doc = JsonArtifact {
        tool: TOOL,
        version: VERSION,
        command: config.command.to_string(),
        seed: config.seed,
        config,
        results: &report.results,
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("artifact is serializable");
    s.push('\n');
    s
}

/// Reads the config echoed in an artifact of either format.
pub fn extract_config_echo(artifact: &str) -> Option<String> {
    if let Some(line) = artifact.lines().find_map(|l| l.strip_prefix("# config: ")) {
        return Some(line.to_string());
    }
    let v: serde_json::Value = serde_json::from_str(artifact).ok()?;
    v.get("config").map(|c| c.to_string())
}
