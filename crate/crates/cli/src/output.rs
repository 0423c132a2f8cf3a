use std::io::Write;
use std::path::Path;

use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Text,
    Json,
    Csv,
}

/// One command result in all three renderings.
pub struct Report {
    pub json: Value,
    pub text: String,
    pub csv: String,
}

/// A float rounded to 12 significant digits, as a JSON number.
pub fn num(x: f64) -> Value {
    if !x.is_finite() {
        return Value::Null;
    }
    let rounded: f64 = format!("{x:.11e}").parse().expect("scientific notation parses");
    serde_json::Number::from_f64(rounded).map(Value::Number).unwrap_or(Value::Null)
}

pub fn nums(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| num(x)).collect())
}

/// Text rendering of a float at 12 significant digits.
pub fn fmt12(x: f64) -> String {
    match num(x) {
        Value::Number(n) => n.to_string(),
        _ => x.to_string(),
    }
}

pub fn emit(report: &Report, format: Format, out: Option<&Path>) -> std::io::Result<()> {
    let body = match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&report.json).expect("values serialize");
            s.push('\n');
            s
        }
        Format::Text => report.text.clone(),
        Format::Csv => report.csv.clone(),
    };
    match out {
        Some(path) => std::fs::write(path, body),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(body.as_bytes())?;
            stdout.flush()
        }
    }
}
