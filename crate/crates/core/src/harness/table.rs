use std::path::Path;
use std::str::FromStr;

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::io::{fmt_f64, write_file};

pub const CODE_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Num(f64),
    Text(String),
}

impl Cell {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Num(v) => Some(*v),
            Cell::Text(_) => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Cell::Text(s) => Some(s),
            Cell::Num(_) => None,
        }
    }

    fn to_csv(&self) -> String {
        match self {
            Cell::Num(v) => fmt_f64(*v),
            Cell::Text(s) => s.clone(),
        }
    }

    fn parse_csv(field: &str) -> Self {
        match field.parse::<f64>() {
            Ok(v) => Cell::Num(v),
            Err(_) => Cell::Text(field.to_string()),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Num(v as f64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

/// Named columns with a metadata block.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultTable {
    pub metadata: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::param(format!("unknown format '{other}'"))),
        }
    }
}

impl ResultTable {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            metadata: Vec::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn set_meta(&mut self, key: &str, value: impl ToString) {
        let value = value.to_string();
        match self.metadata.iter_mut().find(|(k, _)| k == key) {
            Some(entry) => entry.1 = value,
            None => self.metadata.push((key.to_string(), value)),
        }
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metadata.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width must match the column count");
        self.rows.push(row);
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Numeric values of column `name`.
    pub fn numbers(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.column_index(name)?;
        self.rows.iter().map(|row| row[k].as_f64()).collect()
    }

    /// Rows whose column `name` holds the text `value`.
    pub fn rows_where<'a>(&'a self, name: &str, value: &'a str) -> impl Iterator<Item = &'a Vec<Cell>> + 'a {
        let k = self.column_index(name);
        self.rows
            .iter()
            .filter(move |row| k.is_some_and(|k| row[k].as_str() == Some(value)))
    }

    /// `# key: value` lines, a header row, then one line per row.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.metadata {
            out.push_str(&format!("# {k}: {v}\n"));
        }
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let fields: Vec<String> = row.iter().map(Cell::to_csv).collect();
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut metadata = Vec::new();
        let mut lines = text.lines().enumerate().peekable();
        while let Some((_, line)) = lines.peek() {
            let Some(rest) = line.strip_prefix("# ") else { break };
            let (k, v) = rest
                .split_once(": ")
                .ok_or_else(|| Error::data(format!("bad metadata line '{line}'")))?;
            metadata.push((k.to_string(), v.to_string()));
            lines.next();
        }
        let (_, header) = lines.next().ok_or_else(|| Error::data("table has no header row"))?;
        let columns: Vec<String> = header.split(',').map(str::to_string).collect();
        let mut rows = Vec::new();
        for (i, line) in lines {
            let row: Vec<Cell> = line.split(',').map(Cell::parse_csv).collect();
            if row.len() != columns.len() {
                return Err(Error::data(format!("line {}: {} fields, expected {}", i + 1, row.len(), columns.len())));
            }
            rows.push(row);
        }
        Ok(Self { metadata, columns, rows })
    }

    pub fn to_json(&self) -> String {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                Value::Array(
                    row.iter()
                        .map(|c| match c {
                            Cell::Num(v) => json!(v),
                            Cell::Text(s) => json!(s),
                        })
                        .collect(),
                )
            })
            .collect();
        let doc = json!({
            "metadata": self.metadata.iter().map(|(k, v)| json!([k, v])).collect::<Vec<_>>(),
            "columns": self.columns,
            "rows": rows,
        });
        serde_json::to_string_pretty(&doc).expect("JSON values always serialise") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let bad = |what: &str| Error::data(format!("table JSON: {what}"));
        let doc: Value = serde_json::from_str(text).map_err(|e| Error::data(format!("table JSON: {e}")))?;
        let metadata = doc["metadata"]
            .as_array()
            .ok_or_else(|| bad("missing metadata"))?
            .iter()
            .map(|kv| match (kv[0].as_str(), kv[1].as_str()) {
                (Some(k), Some(v)) => Ok((k.to_string(), v.to_string())),
                _ => Err(bad("metadata entries must be [key, value]")),
            })
            .collect::<Result<Vec<_>>>()?;
        let columns = doc["columns"]
            .as_array()
            .ok_or_else(|| bad("missing columns"))?
            .iter()
            .map(|c| c.as_str().map(str::to_string).ok_or_else(|| bad("column names must be strings")))
            .collect::<Result<Vec<_>>>()?;
        let rows = doc["rows"]
            .as_array()
            .ok_or_else(|| bad("missing rows"))?
            .iter()
            .map(|row| {
                let cells = row
                    .as_array()
                    .ok_or_else(|| bad("rows must be arrays"))?
                    .iter()
                    .map(|c| match c {
                        Value::Number(n) => n.as_f64().map(Cell::Num).ok_or_else(|| bad("number out of range")),
                        Value::String(s) => Ok(Cell::Text(s.clone())),
                        _ => Err(bad("cells must be numbers or strings")),
                    })
                    .collect::<Result<Vec<_>>>()?;
                if cells.len() != columns.len() {
                    return Err(bad("row width differs from column count"));
                }
                Ok(cells)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { metadata, columns, rows })
    }
}

/// Write `table` to `path`.
pub fn emit(table: &ResultTable, path: &Path, format: Format) -> Result<()> {
    let text = match format {
        Format::Csv => table.to_csv(),
        Format::Json => table.to_json(),
    };
    write_file(path, &text)
}
