//! Report envelope and the three output encodings.
//!
//! Floats are always written as `{:.16e}` (17 significant digits), which
//! pins down an f64 exactly, so identical runs produce byte-identical
//! documents and a JSON round trip loses nothing. Non-finite values
//! (unbounded price endpoints, one-sided coefficient ranges) appear as
//! `null`.

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};
use std::io;

/// Envelope common to every command. `wall_clock_ms` is the only field
/// that may differ between identical runs; it is kept last so tooling can
/// strip the one line before byte comparison.
#[derive(Serialize)]
pub struct Report {
    pub command: String,
    pub version: &'static str,
    pub inputs: Vec<InputDigest>,
    pub results: serde_json::Value,
    pub wall_clock_ms: u64,
}

#[derive(Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// One row of the path-statistics table; the CSV column order is fixed.
#[derive(Debug, Clone, Serialize)]
pub struct StatRow {
    pub time: f64,
    pub statistic: String,
    pub mean: f64,
    pub std_error: f64,
    pub n_paths: usize,
}

/// Pretty JSON with the fixed-precision float encoding.
struct SciPretty {
    inner: PrettyFormatter<'static>,
}

impl SciPretty {
    fn new() -> Self {
        SciPretty {
            inner: PrettyFormatter::new(),
        }
    }
}

impl Formatter for SciPretty {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.begin_array(writer)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_array(writer)
    }

    fn begin_array_value<W: ?Sized + io::Write>(
        &mut self,
        writer: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.inner.begin_array_value(writer, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_array_value(writer)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.begin_object(writer)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_object(writer)
    }

    fn begin_object_key<W: ?Sized + io::Write>(
        &mut self,
        writer: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.inner.begin_object_key(writer, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.begin_object_value(writer)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_object_value(writer)
    }
}

pub fn to_json(report: &Report) -> String {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SciPretty::new());
    report
        .serialize(&mut ser)
        .expect("report serialization is infallible");
    out.push(b'\n');
    String::from_utf8(out).expect("serialized JSON is UTF-8")
}

pub fn to_csv(rows: &[StatRow]) -> String {
    let mut out = String::from("time,statistic,mean,std_error,n_paths\n");
    for r in rows {
        out.push_str(&format!(
            "{:.16e},{},{:.16e},{:.16e},{}\n",
            r.time, r.statistic, r.mean, r.std_error, r.n_paths
        ));
    }
    out
}

/// Flat `path = value` rendering for reading by humans; carries exactly
/// the numbers of the JSON document.
pub fn to_table(report: &Report) -> String {
    let value = serde_json::to_value(report).expect("report converts to a JSON value");
    let mut lines = Vec::new();
    flatten("", &value, &mut lines);
    let mut out = lines.join("\n");
    out.push('\n');
    out
}

fn flatten(prefix: &str, value: &serde_json::Value, out: &mut Vec<String>) {
    use serde_json::Value;
    match value {
        Value::Object(map) => {
            for (k, v) in map {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&key, v, out);
            }
        }
        Value::Array(items) => {
            if items.is_empty() {
                out.push(format!("{prefix} = []"));
            }
            for (i, v) in items.iter().enumerate() {
                flatten(&format!("{prefix}[{i}]"), v, out);
            }
        }
        Value::Number(n) => {
            let rendered = if let Some(f) = n.as_f64() {
                if n.is_f64() {
                    format!("{f:.16e}")
                } else {
                    n.to_string()
                }
            } else {
                n.to_string()
            };
            out.push(format!("{prefix} = {rendered}"));
        }
        Value::String(s) => out.push(format!("{prefix} = {s}")),
        Value::Bool(b) => out.push(format!("{prefix} = {b}")),
        Value::Null => out.push(format!("{prefix} = null")),
    }
}
