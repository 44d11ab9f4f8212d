//! Canonical JSON: object keys sorted at every level, two-space indent,
//! floats in shortest round-trip form, trailing newline. Equal values
//! always produce equal bytes.

use serde::Serialize;
use serde_json::{Map, Value};

pub fn to_string<T: Serialize>(value: &T) -> serde_json::Result<String> {
    let mut out = serde_json::to_string_pretty(&sorted(serde_json::to_value(value)?))?;
    out.push('\n');
    Ok(out)
}

/// Single-line canonical form, for streamed messages and logs.
pub fn to_line<T: Serialize>(value: &T) -> serde_json::Result<String> {
    serde_json::to_string(&sorted(serde_json::to_value(value)?))
}

// Rebuilt explicitly so the order holds even if a dependency turns on
// serde_json's insertion-ordered maps.
fn sorted(value: Value) -> Value {
    match value {
        Value::Object(map) => {
            let mut entries: Vec<(String, Value)> = map.into_iter().collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            let mut out = Map::new();
            for (k, v) in entries {
                out.insert(k, sorted(v));
            }
            Value::Object(out)
        }
        Value::Array(items) => Value::Array(items.into_iter().map(sorted).collect()),
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn keys_are_sorted_recursively() {
        let v = json!({"b": 1, "a": {"z": [{"y": 1.5, "x": 2}], "c": null}});
        assert_eq!(to_line(&v).unwrap(), r#"{"a":{"c":null,"z":[{"x":2,"y":1.5}]},"b":1}"#);
        assert!(to_string(&v).unwrap().ends_with("}\n"));
    }

    #[test]
    fn floats_round_trip_exactly() {
        for x in [0.1f64, 1.0 / 3.0, 1e-300, 12345.678e10, -0.0] {
            let s = to_line(&x).unwrap();
            let back: f64 = serde_json::from_str(&s).unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{s}");
        }
    }
}
