//! Structured experiment output: inequality slacks, fitted constants, and
//! TSV-ready tables.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Num(f64),
    Text(String),
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Num(v) => write!(f, "{v:.10e}"),
            Cell::Text(s) => f.write_str(s),
        }
    }
}

impl Cell {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Num(v) => Some(*v),
            Cell::Text(_) => None,
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Text(v.to_string())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(columns: &[S]) -> Self {
        Table { columns: columns.iter().map(|c| c.as_ref().to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Numeric entries of a named column; `None` for text cells.
    pub fn numeric_column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r.get(j).and_then(Cell::as_f64)).collect())
    }

    pub fn to_tsv(&self) -> String {
        let mut out = self.columns.join("\t");
        out.push('\n');
        for row in &self.rows {
            let line: Vec<String> = row.iter().map(Cell::to_string).collect();
            let _ = writeln!(out, "{}", line.join("\t"));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub description: String,
    pub value: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Provenance {
    pub tag: String,
    pub seed: Option<u64>,
    pub resolution: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub name: String,
    pub passed: bool,
    /// Smallest `bound - value` over every asserted inequality.
    pub worst_slack: f64,
    pub checks: usize,
    pub witness: Option<Witness>,
    pub fitted: BTreeMap<String, f64>,
    pub table: Table,
    pub provenance: Provenance,
    pub notes: Vec<String>,
}

impl ExperimentReport {
    pub fn new(name: &str, tag: &str) -> Self {
        ExperimentReport {
            name: name.to_string(),
            passed: true,
            worst_slack: f64::INFINITY,
            checks: 0,
            witness: None,
            fitted: BTreeMap::new(),
            table: Table::default(),
            provenance: Provenance { tag: tag.to_string(), ..Default::default() },
            notes: Vec::new(),
        }
    }

    /// Records `value ≤ bound + tol`. The first failing check becomes the
    /// witness; otherwise the witness tracks the tightest check.
    pub fn check(&mut self, value: f64, bound: f64, tol: f64, describe: impl FnOnce() -> String) -> bool {
        self.checks += 1;
        let slack = bound - value;
        let ok = value <= bound + tol && value.is_finite();
        let tighter = slack < self.worst_slack || slack.is_nan();
        if tighter {
            self.worst_slack = slack;
        }
        if !ok && self.passed {
            self.passed = false;
            self.witness = Some(Witness { description: describe(), value, bound });
        } else if ok && self.passed && tighter {
            self.witness = Some(Witness { description: describe(), value, bound });
        }
        ok
    }

    /// Records a failed qualitative assertion.
    pub fn fail(&mut self, description: impl Into<String>) {
        self.checks += 1;
        if self.passed {
            self.passed = false;
            self.witness = Some(Witness { description: description.into(), value: f64::NAN, bound: f64::NAN });
        }
    }

    /// Folds the checks of `other` into this report; fitted values are
    /// copied under `prefix`.
    pub fn absorb(&mut self, prefix: &str, other: &ExperimentReport) {
        self.checks += other.checks;
        if other.worst_slack < self.worst_slack || other.worst_slack.is_nan() {
            self.worst_slack = other.worst_slack;
            if self.passed && other.passed {
                self.witness = other.witness.clone();
            }
        }
        if !other.passed && self.passed {
            self.passed = false;
            self.witness = other.witness.clone();
        }
        for (k, v) in &other.fitted {
            self.fitted.insert(format!("{prefix}{k}"), *v);
        }
        self.notes.extend(other.notes.iter().map(|n| format!("{prefix}{n}")));
    }

    pub fn fit(&mut self, key: &str, value: f64) {
        self.fitted.insert(key.to_string(), value);
    }

    pub fn note(&mut self, note: impl Into<String>) {
        self.notes.push(note.into());
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.provenance.seed = Some(seed);
        self
    }

    pub fn with_resolution(mut self, resolution: impl Into<String>) -> Self {
        self.provenance.resolution = resolution.into();
        self
    }
}
