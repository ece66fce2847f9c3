//! JSON result documents. Keys are sorted and numbers rounded to 12
//! significant digits, so identical runs differ only in `timestamp_unix`.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::{Map, Number, Value};

use crate::io::config::RunConfig;
use crate::io::csv::round_significant;

pub const TOOL_NAME: &str = env!("CARGO_PKG_NAME");
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Field excluded from determinism comparisons.
pub const TIMESTAMP_FIELD: &str = "timestamp_unix";

pub fn round_numbers(value: Value) -> Value {
    match value {
        Value::Number(n) => match n.as_f64() {
            Some(x) if n.is_f64() => Number::from_f64(round_significant(x)).map_or(Value::Null, Value::Number),
            _ => Value::Number(n),
        },
        Value::Array(items) => Value::Array(items.into_iter().map(round_numbers).collect()),
        Value::Object(map) => Value::Object(map.into_iter().map(|(k, v)| (k, round_numbers(v))).collect()),
        other => other,
    }
}

/// Assemble the document for one CLI command.
pub fn result_document<T: Serialize>(command: &str, config: &RunConfig, results: &T) -> serde_json::Result<Value> {
    let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let mut doc = Map::new();
    doc.insert("tool".into(), Value::String(TOOL_NAME.into()));
    doc.insert("version".into(), Value::String(TOOL_VERSION.into()));
    doc.insert("command".into(), Value::String(command.into()));
    doc.insert(TIMESTAMP_FIELD.into(), Value::from(timestamp));
    doc.insert("tolerances".into(), serde_json::to_value(config.tolerances)?);
    doc.insert("config".into(), serde_json::to_value(config)?);
    doc.insert("results".into(), serde_json::to_value(results)?);
    Ok(round_numbers(Value::Object(doc)))
}

pub fn write_document(path: &Path, doc: &Value) -> std::io::Result<()> {
    let mut text = serde_json::to_string_pretty(doc).map_err(std::io::Error::other)?;
    text.push('\n');
    std::fs::write(path, text)
}

/// Copy of `doc` without the timestamp.
pub fn without_timestamp(doc: &Value) -> Value {
    let mut doc = doc.clone();
    if let Value::Object(map) = &mut doc {
        map.remove(TIMESTAMP_FIELD);
    }
    doc
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn rounding() {
        let v = round_numbers(json!({"a": 0.1 + 0.2, "b": [1.0 / 3.0, 7], "c": "x", "d": null}));
        assert_eq!(v, json!({"a": 0.3, "b": [0.333333333333, 7], "c": "x", "d": null}));
    }

    #[test]
    fn document_has_fixed_fields() {
        let config = RunConfig::default();
        let a = result_document("fit", &config, &json!({"omega": 16.5})).unwrap();
        for key in ["tool", "version", "command", TIMESTAMP_FIELD, "tolerances", "config", "results"] {
            assert!(a.get(key).is_some(), "{key}");
        }
        let b = result_document("fit", &config, &json!({"omega": 16.5})).unwrap();
        assert_eq!(without_timestamp(&a), without_timestamp(&b));
        assert_eq!(a["config"]["system"]["e_12"], json!(152.0));
    }
}
