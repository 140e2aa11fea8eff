//! Tab-separated artifact tables and their column schemas.
//!
//! Floats are written with Rust's shortest round-trip `Display` form, so a
//! table's bytes depend only on the values it holds.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Int,
    Float,
    Text,
    Bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Schema {
    pub name: &'static str,
    pub figure: &'static str,
    pub description: &'static str,
    pub columns: &'static [(&'static str, Kind)],
}

use Kind::*;

pub const PCA_VARIANCE: Schema = Schema {
    name: "pca_variance",
    figure: "2a",
    description: "explained variance of hidden states, trained vs. untrained",
    columns: &[
        ("component", Int),
        ("trained_ratio", Float),
        ("trained_cumulative", Float),
        ("untrained_ratio", Float),
        ("untrained_cumulative", Float),
    ],
};

pub const STATE_PROJECTIONS: Schema = Schema {
    name: "state_projections",
    figure: "2b",
    description: "hidden states, readout and initial state on the top principal components",
    columns: &[
        ("kind", Text),
        ("document", Int),
        ("step", Int),
        ("label", Int),
        ("pc1", Float),
        ("pc2", Float),
        ("pc3", Float),
    ],
};

pub const FIXED_POINTS: Schema = Schema {
    name: "fixed_points",
    figure: "2c",
    description: "accepted fixed points with manifold coordinate and principal-component position",
    columns: &[
        ("fixed_point", Int),
        ("initial_state", Int),
        ("q", Float),
        ("iterations", Int),
        ("theta", Float),
        ("logit", Float),
        ("pc1", Float),
        ("pc2", Float),
        ("pc3", Float),
    ],
};

pub const FIXED_POINT_CANDIDATES: Schema = Schema {
    name: "fixed_point_candidates",
    figure: "2c",
    description: "every optimized candidate, accepted or not",
    columns: &[
        ("initial_state", Int),
        ("q", Float),
        ("iterations", Int),
        ("status", Text),
    ],
};

pub const EIGEN_SPECTRA: Schema = Schema {
    name: "eigen_spectra",
    figure: "3",
    description: "recurrent Jacobian eigenvalues per fixed point, sorted by magnitude",
    columns: &[
        ("fixed_point", Int),
        ("mode", Int),
        ("re", Float),
        ("im", Float),
        ("magnitude", Float),
        ("time_constant", Float),
    ],
};

pub const TIME_CONSTANTS: Schema = Schema {
    name: "time_constants",
    figure: "3",
    description: "time constants of the three slowest modes per fixed point",
    columns: &[
        ("fixed_point", Int),
        ("theta", Float),
        ("tau1", Float),
        ("tau2", Float),
        ("tau3", Float),
        ("defective", Bool),
    ],
};

pub const INPUT_EFFECTS: Schema = Schema {
    name: "input_effects",
    figure: "4a",
    description: "per-word effect on the slow mode at the representative fixed point",
    columns: &[
        ("fixed_point", Int),
        ("word", Text),
        ("valence", Text),
        ("coefficient", Float),
        ("projection", Float),
        ("effect_norm", Float),
    ],
};

pub const INPUT_PROJECTIONS: Schema = Schema {
    name: "input_projections",
    figure: "4c",
    description: "mean slow-mode input projection by valence per fixed point",
    columns: &[
        ("fixed_point", Int),
        ("theta", Float),
        ("positive_mean", Float),
        ("negative_mean", Float),
        ("neutral_mean", Float),
        ("sign_separated", Bool),
        ("complex", Bool),
    ],
};

pub const OVERLAPS: Schema = Schema {
    name: "overlaps",
    figure: "4d",
    description: "overlap of the top right eigenvector with the manifold direction",
    columns: &[
        ("fixed_point", Int),
        ("theta", Float),
        ("overlap", Float),
        ("complex", Bool),
    ],
};

pub const OVERLAP_NULL: Schema = Schema {
    name: "overlap_null",
    figure: "4d",
    description: "overlap of random unit vectors with the manifold direction",
    columns: &[("sample", Int), ("overlap", Float)],
};

pub const LINEARIZATION_ERROR: Schema = Schema {
    name: "linearization_error",
    figure: "5b",
    description: "relative error of linearized updates (single steps and whole documents)",
    columns: &[
        ("kind", Text),
        ("document", Int),
        ("step", Int),
        ("fixed_point", Int),
        ("relative_error", Float),
    ],
};

pub const ACCEPTANCE: Schema = Schema {
    name: "acceptance",
    figure: "-",
    description: "pass/fail manifest of pipeline properties",
    columns: &[
        ("criterion", Text),
        ("description", Text),
        ("value", Float),
        ("threshold", Text),
        ("pass", Bool),
    ],
};

/// Tables written by `analyze`, in figure order.
pub const FIGURE_TABLES: [Schema; 10] = [
    PCA_VARIANCE,
    STATE_PROJECTIONS,
    FIXED_POINTS,
    EIGEN_SPECTRA,
    TIME_CONSTANTS,
    INPUT_EFFECTS,
    INPUT_PROJECTIONS,
    OVERLAPS,
    OVERLAP_NULL,
    LINEARIZATION_ERROR,
];

pub fn schema(name: &str) -> Option<Schema> {
    FIGURE_TABLES
        .iter()
        .chain([FIXED_POINT_CANDIDATES, ACCEPTANCE].iter())
        .find(|s| s.name == name)
        .copied()
}

pub fn file_name(name: &str) -> String {
    format!("{name}.tsv")
}

/// One cell value.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(i64),
    Float(f64),
    Text(String),
    Bool(bool),
    Missing,
}

impl From<usize> for Value {
    fn from(v: usize) -> Self {
        Value::Int(v as i64)
    }
}

impl From<u8> for Value {
    fn from(v: u8) -> Self {
        Value::Int(v.into())
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Float(v)
    }
}

impl From<Option<f64>> for Value {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Value::Missing, Value::Float)
    }
}

impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Value::Bool(v)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Text(v.to_string())
    }
}

impl From<String> for Value {
    fn from(v: String) -> Self {
        Value::Text(v)
    }
}

fn render(v: &Value) -> String {
    match v {
        Value::Int(i) => i.to_string(),
        Value::Float(f) => f.to_string(),
        Value::Text(t) => t.replace(['\t', '\n'], " "),
        Value::Bool(b) => b.to_string(),
        Value::Missing => "NA".into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub schema: Schema,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(schema: Schema) -> Self {
        Self { schema, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        assert_eq!(row.len(), self.schema.columns.len(), "row width for {}", self.schema.name);
        self.rows.push(row);
    }

    pub fn to_tsv(&self) -> String {
        let mut s = String::new();
        let header: Vec<&str> = self.schema.columns.iter().map(|c| c.0).collect();
        s.push_str(&header.join("\t"));
        s.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(render).collect();
            let _ = writeln!(s, "{}", cells.join("\t"));
        }
        s
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let p = dir.join(file_name(self.schema.name));
        fs::write(&p, self.to_tsv()).map_err(|e| CliError::io(&p, e))
    }
}

/// Parsed table text: header plus rows of raw cells.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl RawTable {
    pub fn parse(text: &str) -> Self {
        let mut lines = text.lines();
        let header = lines
            .next()
            .map(|l| l.split('\t').map(str::to_string).collect())
            .unwrap_or_default();
        let rows = lines.map(|l| l.split('\t').map(str::to_string).collect()).collect();
        Self { header, rows }
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Numeric values of a column; `NA` and unparsable cells are skipped.
    pub fn floats(&self, name: &str) -> Vec<f64> {
        let Some(c) = self.column(name) else {
            return Vec::new();
        };
        self.rows.iter().filter_map(|r| r.get(c)?.parse().ok()).collect()
    }
}

/// Checks a table against its schema. Returns a list of problems (empty when valid).
pub fn validate(schema: &Schema, text: &str) -> Vec<String> {
    let raw = RawTable::parse(text);
    let mut problems = Vec::new();
    let expected: Vec<&str> = schema.columns.iter().map(|c| c.0).collect();
    if raw.header != expected {
        problems.push(format!(
            "{}: header is [{}], expected [{}]",
            schema.name,
            raw.header.join(", "),
            expected.join(", ")
        ));
        return problems;
    }
    for (i, row) in raw.rows.iter().enumerate() {
        if row.len() != expected.len() {
            problems.push(format!("{}: row {} has {} fields, expected {}", schema.name, i + 1, row.len(), expected.len()));
            continue;
        }
        for ((name, kind), cell) in schema.columns.iter().zip(row) {
            let ok = cell == "NA"
                || match kind {
                    Int => cell.parse::<i64>().is_ok(),
                    Float => cell.parse::<f64>().is_ok(),
                    Bool => cell == "true" || cell == "false",
                    Text => true,
                };
            if !ok {
                problems.push(format!("{}: row {} column {name}: '{cell}' is not {kind:?}", schema.name, i + 1));
            }
        }
    }
    problems
}
