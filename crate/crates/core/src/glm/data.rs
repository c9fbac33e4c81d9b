//! Column-typed in-memory tables and the CSV dialect used for all input and
//! output: RFC 4180, header row first, UTF-8.
//!
//! A column is numeric when every value parses as a finite decimal number,
//! otherwise it is categorical with levels in first-appearance order. Empty
//! cells and `NA`/`NaN` are missing values, which are rejected.

use std::io::{Read, Write};
use std::path::Path as FsPath;

use super::GlmError;

#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    Numeric(Vec<f64>),
    Categorical { levels: Vec<String>, codes: Vec<usize> },
}

impl Column {
    pub fn len(&self) -> usize {
        match self {
            Column::Numeric(v) => v.len(),
            Column::Categorical { codes, .. } => codes.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self, Column::Numeric(_))
    }

    /// Builds a categorical column, recording levels by first appearance.
    pub fn categorical<S: AsRef<str>>(values: &[S]) -> Self {
        let mut levels: Vec<String> = Vec::new();
        let codes = values
            .iter()
            .map(|v| {
                let v = v.as_ref();
                match levels.iter().position(|l| l == v) {
                    Some(i) => i,
                    None => {
                        levels.push(v.to_string());
                        levels.len() - 1
                    }
                }
            })
            .collect();
        Column::Categorical { levels, codes }
    }

    fn take(&self, rows: &[usize]) -> Self {
        match self {
            Column::Numeric(v) => Column::Numeric(rows.iter().map(|&r| v[r]).collect()),
            Column::Categorical { levels, codes } => {
                let values: Vec<&str> = rows.iter().map(|&r| levels[codes[r]].as_str()).collect();
                Column::categorical(&values)
            }
        }
    }

    fn cell(&self, row: usize) -> String {
        match self {
            Column::Numeric(v) => format_number(v[row]),
            Column::Categorical { levels, codes } => levels[codes[row]].clone(),
        }
    }
}

/// Shortest representation that parses back to the same `f64`.
pub fn format_number(v: f64) -> String {
    format!("{v}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    names: Vec<String>,
    columns: Vec<Column>,
    n_rows: usize,
}

impl Dataset {
    pub fn new(names: Vec<String>, columns: Vec<Column>) -> Result<Self, GlmError> {
        if names.len() != columns.len() {
            return Err(GlmError::Shape(format!(
                "{} names for {} columns",
                names.len(),
                columns.len()
            )));
        }
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(GlmError::DuplicateColumn(n.clone()));
            }
        }
        let n_rows = columns.first().map(Column::len).unwrap_or(0);
        if let Some((name, col)) = names.iter().zip(&columns).find(|(_, c)| c.len() != n_rows) {
            return Err(GlmError::Shape(format!(
                "column {name} has {} rows, expected {n_rows}",
                col.len()
            )));
        }
        for (name, col) in names.iter().zip(&columns) {
            if let Column::Numeric(v) = col {
                if let Some(row) = v.iter().position(|x| !x.is_finite()) {
                    return Err(GlmError::MissingValue {
                        column: name.clone(),
                        row: row + 1,
                    });
                }
            }
        }
        Ok(Self {
            names,
            columns,
            n_rows,
        })
    }

    /// Convenience constructor for all-numeric tables.
    pub fn from_numeric<S: Into<String>>(
        columns: impl IntoIterator<Item = (S, Vec<f64>)>,
    ) -> Result<Self, GlmError> {
        let (names, cols): (Vec<String>, Vec<Column>) = columns
            .into_iter()
            .map(|(n, v)| (n.into(), Column::Numeric(v)))
            .unzip();
        Self::new(names, cols)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.names.iter().any(|n| n == name)
    }

    pub fn column(&self, name: &str) -> Result<&Column, GlmError> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| &self.columns[i])
            .ok_or_else(|| GlmError::UnknownColumn(name.to_string()))
    }

    pub fn numeric(&self, name: &str) -> Result<&[f64], GlmError> {
        match self.column(name)? {
            Column::Numeric(v) => Ok(v),
            Column::Categorical { .. } => Err(GlmError::NotNumeric(name.to_string())),
        }
    }

    /// Rows in the given order (repeats allowed). Categorical levels are
    /// re-derived from the selected rows.
    pub fn take_rows(&self, rows: &[usize]) -> Self {
        Self {
            names: self.names.clone(),
            columns: self.columns.iter().map(|c| c.take(rows)).collect(),
            n_rows: rows.len(),
        }
    }

    /// Appends or replaces a column.
    pub fn with_column(mut self, name: &str, column: Column) -> Result<Self, GlmError> {
        if column.len() != self.n_rows && !self.columns.is_empty() {
            return Err(GlmError::Shape(format!(
                "column {name} has {} rows, expected {}",
                column.len(),
                self.n_rows
            )));
        }
        match self.names.iter().position(|n| n == name) {
            Some(i) => self.columns[i] = column,
            None => {
                self.names.push(name.to_string());
                self.columns.push(column);
            }
        }
        Self::new(self.names, self.columns)
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self, GlmError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(false)
            .from_reader(reader);
        let names: Vec<String> = rdr
            .headers()
            .map_err(csv_error)?
            .iter()
            .map(|h| h.trim().to_string())
            .collect();
        if names.is_empty() || names.iter().all(String::is_empty) {
            return Err(GlmError::Csv("missing header row".into()));
        }
        let mut raw: Vec<Vec<String>> = vec![Vec::new(); names.len()];
        for (row, record) in rdr.records().enumerate() {
            let record = record.map_err(csv_error)?;
            for (j, field) in record.iter().enumerate() {
                let field = field.trim();
                if is_missing(field) {
                    return Err(GlmError::MissingValue {
                        column: names[j].clone(),
                        row: row + 1,
                    });
                }
                raw[j].push(field.to_string());
            }
        }
        let columns = raw
            .into_iter()
            .map(|values| {
                let parsed: Option<Vec<f64>> = values
                    .iter()
                    .map(|v| v.parse::<f64>().ok().filter(|x| x.is_finite()))
                    .collect();
                match parsed {
                    Some(nums) => Column::Numeric(nums),
                    None => Column::categorical(&values),
                }
            })
            .collect();
        Self::new(names, columns)
    }

    pub fn read_csv_path(path: impl AsRef<FsPath>) -> Result<Self, GlmError> {
        let path = path.as_ref();
        let file = std::fs::File::open(path)
            .map_err(|e| GlmError::Csv(format!("{}: {e}", path.display())))?;
        Self::read_csv(std::io::BufReader::new(file))
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), GlmError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(&self.names).map_err(csv_error)?;
        for row in 0..self.n_rows {
            w.write_record(self.columns.iter().map(|c| c.cell(row)))
                .map_err(csv_error)?;
        }
        w.flush().map_err(|e| GlmError::Csv(e.to_string()))
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("csv output is utf-8")
    }
}

fn is_missing(field: &str) -> bool {
    field.is_empty() || field.eq_ignore_ascii_case("na") || field.eq_ignore_ascii_case("nan")
}

fn csv_error(e: csv::Error) -> GlmError {
    GlmError::Csv(e.to_string())
}
