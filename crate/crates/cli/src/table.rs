//! In-memory CSV tables with a fixed, locale-independent number format.

use std::path::Path;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i128),
    Real(f64),
    Bool(bool),
    Text(String),
    Missing,
}

impl Cell {
    /// Reals use 17 significant digits in scientific notation, which
    /// round-trips every `f64` exactly. Missing values are empty fields.
    pub fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Real(v) if v.is_nan() => "NaN".into(),
            Cell::Real(v) if v.is_infinite() => if *v > 0.0 { "inf" } else { "-inf" }.into(),
            Cell::Real(v) => format!("{v:.16e}"),
            Cell::Bool(v) => v.to_string(),
            Cell::Text(v) => v.clone(),
            Cell::Missing => String::new(),
        }
    }

    fn is_non_finite(&self) -> bool {
        matches!(self, Cell::Real(v) if !v.is_finite())
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Real(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Missing, Cell::Real)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v.into())
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i128)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.into())
    }
}

/// One CSV file: `name` is the file stem.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: impl Into<String>, header: Vec<&'static str>) -> Self {
        Self {
            name: name.into(),
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn file_name(&self) -> String {
        format!("{}.csv", self.name)
    }

    /// First `(row, column)` holding NaN or an infinity.
    pub fn first_non_finite(&self) -> Option<(usize, &'static str)> {
        self.rows.iter().enumerate().find_map(|(i, row)| {
            row.iter()
                .position(Cell::is_non_finite)
                .map(|j| (i, self.header[j]))
        })
    }

    pub fn to_csv_bytes(&self) -> CliResult<Vec<u8>> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(&self.header)?;
        for row in &self.rows {
            writer.write_record(row.iter().map(Cell::render))?;
        }
        writer
            .into_inner()
            .map_err(|e| CliError::Numeric(format!("csv buffer: {e}")))
    }

    pub fn write(&self, dir: &Path) -> CliResult<()> {
        let path = dir.join(self.file_name());
        std::fs::write(&path, self.to_csv_bytes()?).map_err(|e| CliError::io(path, e))
    }
}
