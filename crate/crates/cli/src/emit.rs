//! CSV and JSON writers. Floats carry 17 significant digits so that parsing the
//! output recovers every value bit for bit.

use std::io::{self, Write};
use std::path::Path;

use edwards::experiments::SuiteReport;
use edwards::McEstimate;
use serde::Serialize;
use serde_json::ser::Formatter;
use serde_json::{json, Map, Value};

use crate::config::Format;
use crate::CliError;

/// Renders `x` with 17 significant digits; non-finite values as `NaN`, `inf`, `-inf`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

struct SigFormatter;

impl Formatter for SigFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(fmt_f64(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }
}

/// Compact JSON with 17-digit floats and a trailing newline.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SigFormatter);
    value
        .serialize(&mut ser)
        .map_err(|e| CliError::Io(format!("serialize: {e}")))?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("JSON is UTF-8"))
}

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Int(u64),
    Float(f64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            Cell::Float(x) => fmt_f64(*x),
            Cell::Text(s) => s.clone(),
        }
    }

    fn to_json(&self) -> Value {
        match self {
            Cell::Int(i) => json!(i),
            Cell::Float(x) => json!(x),
            Cell::Text(s) => json!(s),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

/// One Monte-Carlo or closed-form value with the parameters that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct Record {
    pub op: String,
    pub params: Vec<(String, f64)>,
    pub mean: f64,
    pub stderr: f64,
    pub n: u64,
    pub seed: u64,
}

impl Record {
    pub fn new(op: impl Into<String>, params: &[(&str, f64)], est: McEstimate) -> Self {
        Self {
            op: op.into(),
            params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            mean: est.mean,
            stderr: est.stderr,
            n: est.n,
            seed: est.seed,
        }
    }

    pub fn exact(op: impl Into<String>, params: &[(&str, f64)], value: f64, seed: u64) -> Self {
        Self::new(op, params, McEstimate::exact(value, seed))
    }

    fn to_json(&self) -> Value {
        let params: Map<String, Value> = self.params.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
        json!({
            "op": self.op,
            "params": params,
            "mean": self.mean,
            "stderr": self.stderr,
            "n": self.n,
            "seed": self.seed,
        })
    }
}

pub enum Output {
    Table(Table),
    Records(Vec<Record>),
    Report(SuiteReport),
}

impl Output {
    pub fn default_format(&self) -> Format {
        match self {
            Output::Table(_) => Format::Csv,
            Output::Records(_) | Output::Report(_) => Format::Json,
        }
    }

    pub fn to_table(&self) -> Table {
        match self {
            Output::Table(t) => t.clone(),
            Output::Records(recs) => {
                let mut cols = vec!["op".to_string()];
                let keys: Vec<String> = recs.first().map(|r| r.params.iter().map(|p| p.0.clone()).collect()).unwrap_or_default();
                cols.extend(keys.iter().cloned());
                cols.extend(["mean", "stderr", "n", "seed"].map(String::from));
                let rows = recs
                    .iter()
                    .map(|r| {
                        let mut row = vec![Cell::Text(r.op.clone())];
                        row.extend(keys.iter().map(|k| {
                            Cell::Float(r.params.iter().find(|p| &p.0 == k).map_or(f64::NAN, |p| p.1))
                        }));
                        row.extend([Cell::Float(r.mean), Cell::Float(r.stderr), Cell::Int(r.n), Cell::Int(r.seed)]);
                        row
                    })
                    .collect();
                Table { columns: cols, rows }
            }
            Output::Report(r) => {
                let mut t = Table::new(&["name", "observed", "target", "tolerance", "comparison", "pass"]);
                for c in &r.checks {
                    let cmp = serde_json::to_value(c.comparison).expect("enum serializes");
                    t.push(vec![
                        Cell::Text(c.name.clone()),
                        Cell::Float(c.observed),
                        Cell::Float(c.target),
                        Cell::Float(c.tolerance),
                        Cell::Text(cmp.as_str().unwrap_or_default().to_string()),
                        Cell::Text(c.pass.to_string()),
                    ]);
                }
                t
            }
        }
    }

    /// JSON document: `meta` first, then the payload.
    pub fn to_json(&self, meta: &Value) -> Value {
        let mut doc = Map::new();
        doc.insert("meta".into(), meta.clone());
        match self {
            Output::Table(t) => {
                doc.insert("columns".into(), json!(t.columns));
                let rows: Vec<Value> = t.rows.iter().map(|r| Value::Array(r.iter().map(Cell::to_json).collect())).collect();
                doc.insert("rows".into(), Value::Array(rows));
            }
            Output::Records(recs) => {
                doc.insert("records".into(), Value::Array(recs.iter().map(Record::to_json).collect()));
            }
            Output::Report(r) => {
                let Value::Object(fields) = serde_json::to_value(r).expect("report serializes") else {
                    unreachable!()
                };
                // wall time goes to stderr so that reports are reproducible
                doc.extend(fields.into_iter().filter(|(k, _)| k != "wall_time_s"));
            }
        }
        Value::Object(doc)
    }
}

/// CSV text: `#`-prefixed metadata lines, one header row, then the rows.
pub fn to_csv_string(table: &Table, meta: &Value) -> Result<String, CliError> {
    let mut buf = Vec::new();
    if let Value::Object(m) = meta {
        for (k, v) in m {
            let text = match v {
                Value::String(s) => s.clone(),
                other => to_json_string(other)?.trim_end().to_string(),
            };
            writeln!(buf, "# {k}: {text}").map_err(|e| CliError::Io(e.to_string()))?;
        }
    }
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(&table.columns).map_err(|e| CliError::Io(e.to_string()))?;
        for row in &table.rows {
            w.write_record(row.iter().map(Cell::render)).map_err(|e| CliError::Io(e.to_string()))?;
        }
        w.flush().map_err(|e| CliError::Io(e.to_string()))?;
    }
    Ok(String::from_utf8(buf).expect("CSV is UTF-8"))
}

#[cfg(test)]
/// Reads CSV written by [`to_csv_string`] back into columns and string cells.
pub fn parse_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<String>>), CliError> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let cols = r
        .headers()
        .map_err(|e| CliError::Io(e.to_string()))?
        .iter()
        .map(String::from)
        .collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        rows.push(rec.map_err(|e| CliError::Io(e.to_string()))?.iter().map(String::from).collect());
    }
    Ok((cols, rows))
}

/// Renders `out` and writes it to `path` (created with its parent
/// directories) or to stdout.
pub fn emit(out: &Output, format: Format, meta: &Value, path: Option<&Path>) -> Result<(), CliError> {
    let text = match format {
        Format::Csv => to_csv_string(&out.to_table(), meta)?,
        Format::Json => to_json_string(&out.to_json(meta))?,
    };
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
            }
            std::fs::write(p, text).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))
        }
        None => {
            let mut stdout = io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|()| stdout.flush())
                .map_err(|e| CliError::Io(format!("stdout: {e}")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_table_is_header_only() {
        let csv = to_csv_string(&Table::new(&["n", "rho"]), &json!({})).unwrap();
        assert_eq!(csv, "n,rho\n");
    }

    #[test]
    fn metadata_lines_are_comments() {
        let meta = json!({"command": "spectrum", "seed": 3});
        let mut t = Table::new(&["n", "rho"]);
        t.push(vec![Cell::Int(0), Cell::Float(2.5)]);
        let csv = to_csv_string(&t, &meta).unwrap();
        assert!(csv.starts_with("# command: spectrum\n# seed: 3\nn,rho\n"));
        let (cols, rows) = parse_csv(&csv).unwrap();
        assert_eq!(cols, vec!["n", "rho"]);
        assert_eq!(rows, vec![vec!["0".to_string(), "2.5000000000000000e0".to_string()]]);
    }

    #[test]
    fn json_keys_keep_insertion_order() {
        let rec = Record::exact("alpha", &[("l", 1.0), ("v", 2.0)], 0.25, 7);
        let doc = Output::Records(vec![rec]).to_json(&json!({"command": "kernel"}));
        let s = to_json_string(&doc).unwrap();
        assert!(s.starts_with(r#"{"meta":{"command":"kernel"},"records":[{"op":"alpha","params":{"l":1.0000000000000000e0,"v":2.0000000000000000e0},"mean":2.5000000000000000e-1,"stderr":0.0000000000000000e0,"n":0,"seed":7}]}"#), "{s}");
    }

    #[test]
    fn non_finite_json_is_null() {
        assert_eq!(to_json_string(&json!([f64::NAN])).unwrap(), "[null]\n");
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_bit_exact(xs in proptest::collection::vec(any::<f64>().prop_filter("finite", |x| x.is_finite()), 0..20)) {
            let mut t = Table::new(&["i", "x"]);
            for (i, &x) in xs.iter().enumerate() {
                t.push(vec![Cell::Int(i as u64), Cell::Float(x)]);
            }
            let (_, rows) = parse_csv(&to_csv_string(&t, &json!({"seed": 1})).unwrap()).unwrap();
            prop_assert_eq!(rows.len(), xs.len());
            for (row, &x) in rows.iter().zip(&xs) {
                prop_assert_eq!(row[1].parse::<f64>().unwrap().to_bits(), x.to_bits());
            }
        }

        #[test]
        fn json_round_trip_is_bit_exact(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
            let s = to_json_string(&json!({"x": x})).unwrap();
            let back: Value = serde_json::from_str(&s).unwrap();
            prop_assert_eq!(back["x"].as_f64().unwrap().to_bits(), x.to_bits());
        }
    }
}
