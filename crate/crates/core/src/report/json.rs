use std::fmt::Write as _;

use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, ErrorCode, Result};
use crate::session::AnalysisSession;

/// Renders a float with 17 significant digits, enough to round-trip any f64.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_value(out: &mut String, value: &Value) {
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => match (n.as_u64(), n.as_i64()) {
            (Some(u), _) => write!(out, "{u}").expect("write to string"),
            (None, Some(i)) => write!(out, "{i}").expect("write to string"),
            _ => out.push_str(&format_float(n.as_f64().unwrap_or(0.0))),
        },
        Value::String(s) => out.push_str(&serde_json::to_string(s).expect("string serializes")),
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_value(out, item);
            }
            out.push(']');
        }
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, key) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&serde_json::to_string(key).expect("string serializes"));
                out.push(':');
                write_value(out, &map[key]);
            }
            out.push('}');
        }
    }
}

/// Compact JSON with sorted object keys and 17-significant-digit floats.
/// Integers stay integers.
pub fn canonical_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let value = serde_json::to_value(value)
        .map_err(|e| Error::new(ErrorCode::InvalidInput, format!("value cannot be serialized: {e}")))?;
    let mut out = String::new();
    write_value(&mut out, &value);
    Ok(out)
}

/// Canonical JSON dump of a whole session.
pub fn export_session_json(session: &AnalysisSession) -> Result<String> {
    canonical_json(session)
}

pub fn import_session_json(raw: &[u8]) -> Result<AnalysisSession> {
    serde_json::from_slice(raw)
        .map_err(|e| Error::new(ErrorCode::InvalidInput, format!("not a session export: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn keys_sorted_and_floats_fixed() {
        let v = serde_json::json!({"b": 1, "a": [0.5, -3, "x\"y"], "c": {"z": null, "y": true}});
        assert_eq!(
            canonical_json(&v).unwrap(),
            r#"{"a":[5.0000000000000000e-1,-3,"x\"y"],"b":1,"c":{"y":true,"z":null}}"#
        );
    }

    #[test]
    fn session_round_trip_is_byte_stable() {
        let mut s = AnalysisSession::new("s1", "2026-01-01T00:00:00Z");
        s.ingest(crate::engine::InputKind::Qrels, "q", b"q1 0 a 2\nq1 0 b 1\n", "t").unwrap();
        s.ingest(crate::engine::InputKind::Run, "r", b"q1 Q0 a 1 0.3 x\nq1 Q0 b 2 0.1 x\n", "t").unwrap();
        let req = crate::engine::AnalysisRequest::from_json(serde_json::json!({"kind": "evaluate"})).unwrap();
        s.run_inline(&req, "t").unwrap();
        let first = export_session_json(&s).unwrap();
        let back = import_session_json(first.as_bytes()).unwrap();
        assert_eq!(back, s);
        assert_eq!(export_session_json(&back).unwrap(), first);
    }

    proptest! {
        #[test]
        fn floats_round_trip(x in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
            let text = canonical_json(&x).unwrap();
            let back: f64 = serde_json::from_str(&text).unwrap();
            prop_assert_eq!(back.to_bits(), x.to_bits());
        }
    }
}
