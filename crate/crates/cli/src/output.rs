//! Result rows and their JSON/CSV rendering with 17 significant digits.

use crate::job::Format;
use heatlab_core::traces::TraceValue;
use num_complex::Complex64;
use serde_json::{Map, Number, Value};

/// One emitted result.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub inputs: Map<String, Value>,
    pub value: Value,
    /// Null when the method carries no a-priori bound (fits, closed-form checks).
    pub error_bound: Value,
    pub method: String,
    pub formula: String,
    pub extra: Map<String, Value>,
}

impl Row {
    pub fn new(inputs: Map<String, Value>, value: Value, error_bound: Value, method: &str, formula: &str) -> Self {
        Self { inputs, value, error_bound, method: method.into(), formula: formula.into(), extra: Map::new() }
    }

    pub fn from_trace(inputs: Map<String, Value>, v: TraceValue, formula: &str) -> Self {
        Self::new(inputs, num(v.value), num(v.error_bound), v.method.name(), formula)
    }

    pub fn with(mut self, key: &str, value: Value) -> Self {
        self.extra.insert(key.into(), value);
        self
    }

    pub fn to_json(&self) -> Value {
        let mut m = Map::new();
        m.insert("inputs".into(), Value::Object(self.inputs.clone()));
        m.insert("value".into(), self.value.clone());
        m.insert("error_bound".into(), self.error_bound.clone());
        m.insert("method".into(), Value::String(self.method.clone()));
        m.insert("formula".into(), Value::String(self.formula.clone()));
        for (k, v) in &self.extra {
            m.insert(k.clone(), v.clone());
        }
        Value::Object(m)
    }
}

/// A float as a JSON number with 17 significant digits; non-finite values become null.
pub fn num(x: f64) -> Value {
    if !x.is_finite() {
        return Value::Null;
    }
    Value::Number(format!("{x:.16e}").parse::<Number>().expect("formatted float is a JSON number"))
}

pub fn complex(z: Complex64) -> Value {
    let mut m = Map::new();
    m.insert("re".into(), num(z.re));
    m.insert("im".into(), num(z.im));
    Value::Object(m)
}

pub fn nums(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| num(x)).collect())
}

pub fn document(command: &str, rows: &[Row]) -> Value {
    let mut m = Map::new();
    m.insert("program".into(), Value::String("heatlab".into()));
    m.insert("version".into(), Value::String(env!("CARGO_PKG_VERSION").into()));
    m.insert("command".into(), Value::String(command.into()));
    m.insert("rows".into(), Value::Array(rows.iter().map(Row::to_json).collect()));
    Value::Object(m)
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, x, out);
            }
        }
        Value::Null => out.push((prefix.into(), String::new())),
        Value::String(s) => out.push((prefix.into(), s.clone())),
        other => out.push((prefix.into(), other.to_string())),
    }
}

/// CSV with one column per flattened JSON key, in first-appearance order.
pub fn to_csv(rows: &[Row]) -> Result<String, String> {
    let flat: Vec<Vec<(String, String)>> = rows
        .iter()
        .map(|r| {
            let mut out = Vec::new();
            flatten("", &r.to_json(), &mut out);
            out
        })
        .collect();
    let mut columns: Vec<String> = Vec::new();
    for row in &flat {
        for (k, _) in row {
            if !columns.contains(k) {
                columns.push(k.clone());
            }
        }
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&columns).map_err(|e| e.to_string())?;
    for row in &flat {
        let rec: Vec<&str> =
            columns.iter().map(|c| row.iter().find(|(k, _)| k == c).map_or("", |(_, v)| v.as_str())).collect();
        w.write_record(&rec).map_err(|e| e.to_string())?;
    }
    String::from_utf8(w.into_inner().map_err(|e| e.to_string())?).map_err(|e| e.to_string())
}

pub fn render(command: &str, rows: &[Row], format: Format) -> Result<String, String> {
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&document(command, rows)).map_err(|e| e.to_string())?;
            s.push('\n');
            Ok(s)
        }
        Format::Csv => to_csv(rows),
    }
}
