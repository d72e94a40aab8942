//! Machine-readable reports: a common envelope around each command's result,
//! written as JSON with every float at 17 significant digits, or as CSV.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use serde_json::ser::{CompactFormatter, Formatter, PrettyFormatter};
use serde_json::Value;

pub const TOOLKIT: &str = "uclab";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub toolkit: String,
    pub version: String,
    pub command: String,
    pub config: Value,
    pub passed: bool,
    pub failures: Vec<String>,
    pub result: Value,
    /// Optional sweep table; the CSV output prefers it over the flattened result.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<Table>,
    /// Present only when timing was requested, so that reports stay byte-stable.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Report {
    pub fn new<C: Serialize, R: Serialize>(command: &str, config: &C, result: &R, failures: Vec<String>) -> Self {
        Self {
            toolkit: TOOLKIT.into(),
            version: VERSION.into(),
            command: command.into(),
            config: serde_json::to_value(config).expect("config serializes"),
            passed: failures.is_empty(),
            failures,
            result: serde_json::to_value(result).expect("result serializes"),
            table: None,
            wall_time_s: None,
        }
    }

    pub fn with_table(mut self, table: Table) -> Self {
        self.table = Some(table);
        self
    }

    pub fn to_json(&self) -> String {
        let mut out = Vec::new();
        let mut ser = serde_json::Serializer::with_formatter(&mut out, Digits17(PrettyFormatter::new()));
        self.serialize(&mut ser).expect("report serializes");
        out.push(b'\n');
        String::from_utf8(out).expect("JSON is UTF-8")
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    /// The table if present, otherwise one `key,value` row per leaf of the
    /// report with JSON-pointer keys.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        match &self.table {
            Some(t) => {
                w.write_record(&t.columns).expect("in-memory write");
                for row in &t.rows {
                    w.write_record(row.iter().map(cell)).expect("in-memory write");
                }
            }
            None => {
                w.write_record(["key", "value"]).expect("in-memory write");
                let mut leaves = Vec::new();
                let envelope = serde_json::to_value(self).expect("report serializes");
                flatten("", &envelope, &mut leaves);
                for (k, v) in leaves {
                    w.write_record([k, v]).expect("in-memory write");
                }
            }
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("CSV is UTF-8")
    }
}

fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        Value::Number(n) if n.is_f64() => format_f64(n.as_f64().expect("f64 number")),
        other => compact(other),
    }
}

fn compact(v: &Value) -> String {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, Digits17(CompactFormatter));
    v.serialize(&mut ser).expect("value serializes");
    String::from_utf8(out).expect("JSON is UTF-8")
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    match v {
        Value::Object(map) => {
            for (k, x) in map {
                flatten(&format!("{prefix}/{k}"), x, out);
            }
        }
        Value::Array(items) => {
            for (i, x) in items.iter().enumerate() {
                flatten(&format!("{prefix}/{i}"), x, out);
            }
        }
        leaf => out.push((prefix.to_string(), cell(leaf))),
    }
}

/// Wraps a formatter so that floats are written with 17 significant digits.
struct Digits17<F>(F);

impl<F: Formatter> Formatter for Digits17<F> {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(format_f64(value).as_bytes())
    }
    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn end_object_key<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_key(w)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}
