//! Deterministic file emission: every float is printed with 17 significant
//! digits (`{:.16e}`) in both CSV and JSON, so identical runs produce
//! byte-identical artifacts.

use serde_json::Value;
use sha2::{Digest, Sha256};
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// One CSV cell.
#[derive(Debug, Clone)]
pub enum Field {
    F(f64),
    /// Optional value; `None` prints as an empty cell.
    OptF(Option<f64>),
    B(bool),
    S(String),
}

impl Field {
    fn render(&self) -> String {
        match self {
            Field::F(v) => fmt_f64(*v),
            Field::OptF(Some(v)) => fmt_f64(*v),
            Field::OptF(None) => String::new(),
            Field::B(v) => v.to_string(),
            Field::S(v) => v.clone(),
        }
    }
}

pub fn write_csv(path: &Path, header: &str, rows: &[Vec<Field>]) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{header}")?;
    for row in rows {
        let line: Vec<String> = row.iter().map(Field::render).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()
}

/// serde_json formatter that renders every float with 17 significant
/// digits.
struct SciFormatter;

impl serde_json::ser::Formatter for SciFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        write!(writer, "{value:.16e}")
    }
}

pub fn json_to_string(value: &Value) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SciFormatter);
    serde::Serialize::serialize(value, &mut ser).expect("in-memory JSON serialization");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

pub fn write_json(path: &Path, value: &Value) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(json_to_string(value).as_bytes())?;
    writeln!(w)?;
    w.flush()
}

/// Stable fingerprint of the resolved configuration, carried by every
/// emitted summary.
pub fn config_hash<T: serde::Serialize>(config: &T) -> String {
    let canonical = serde_json::to_string(config).expect("serializable config");
    let digest = Sha256::digest(canonical.as_bytes());
    let mut hex = String::with_capacity(64);
    for byte in digest {
        hex.push_str(&format!("{byte:02x}"));
    }
    hex
}

/// JSON value for an optional float, `null` when absent.
pub fn opt_json(v: Option<f64>) -> Value {
    match v {
        Some(x) => Value::from(x),
        None => Value::Null,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_carry_seventeen_significant_digits() {
        assert_eq!(fmt_f64(0.25), "2.5000000000000000e-1");
        assert_eq!(fmt_f64(103107.05), "1.0310705000000000e5");
    }

    #[test]
    fn json_floats_use_the_same_format() {
        let v = serde_json::json!({"a": 0.25, "b": null, "n": 3});
        assert_eq!(
            json_to_string(&v),
            "{\"a\":2.5000000000000000e-1,\"b\":null,\"n\":3}"
        );
    }

    #[test]
    fn hash_is_stable_and_input_sensitive() {
        let a = config_hash(&serde_json::json!({"x": 1}));
        let b = config_hash(&serde_json::json!({"x": 1}));
        let c = config_hash(&serde_json::json!({"x": 2}));
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.len(), 64);
    }
}
