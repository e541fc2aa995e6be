use std::io::{self, Write};
use std::path::Path;

use serde_json::ser::Formatter;
use serde_json::{Map, Number, Value};

use crate::CliError;

/// Significant digits in the stdout summary.
const SUMMARY_DIGITS: usize = 6;
/// Significant digits in written files; enough to round-trip any `f64`.
const FILE_DIGITS: usize = 17;

#[derive(Debug, Clone)]
pub enum Cell {
    Num(f64),
    Text(String),
    Bool(bool),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
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

#[derive(Debug, Clone, Default)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Table { header: header.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .map(|c| match c {
                    Cell::Num(v) => fmt_sig(*v, FILE_DIGITS),
                    Cell::Text(s) => csv_text(s),
                    Cell::Bool(b) => b.to_string(),
                })
                .collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

fn csv_text(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// `v` with `digits` significant digits in scientific notation.
pub fn fmt_sig(v: f64, digits: usize) -> String {
    if v.is_finite() {
        format!("{:.*e}", digits - 1, v)
    } else {
        v.to_string()
    }
}

fn round_sig(v: f64, digits: usize) -> f64 {
    if v.is_finite() {
        fmt_sig(v, digits).parse().unwrap_or(v)
    } else {
        v
    }
}

/// Rounds every float in `v` to the summary precision.
pub fn round_summary(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = round_sig(n.as_f64().unwrap_or(f64::NAN), SUMMARY_DIGITS);
            Number::from_f64(x).map_or(Value::Null, Value::Number)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(round_summary).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, round_summary(v))).collect::<Map<_, _>>()),
        other => other,
    }
}

/// Compact JSON writer that prints floats with full precision.
struct FileFormatter;

impl Formatter for FileFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(fmt_sig(value, FILE_DIGITS).as_bytes())
    }
}

pub fn file_json(v: &Value) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FileFormatter);
    serde::Serialize::serialize(v, &mut ser).expect("in-memory JSON serialization");
    buf.push(b'\n');
    String::from_utf8(buf).expect("JSON is UTF-8")
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
}
