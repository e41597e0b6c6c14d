//! JSON report envelope. Floats are written with 17 significant digits so
//! every value round-trips; non-finite values become `null`.

use crate::error::{Error, Result};
use serde::Serialize;
use serde_json::ser::Formatter;
use serde_json::Value;
use std::io::{self, Write};

pub const REPORT_SCHEMA: &str = "ifsdim-report/1";

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub schema: &'static str,
    pub command: String,
    pub version: &'static str,
    pub config: Value,
    pub result: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
}

impl Report {
    pub fn new(command: impl Into<String>, config: Value, result: Value) -> Self {
        Self {
            schema: REPORT_SCHEMA,
            command: command.into(),
            version: env!("CARGO_PKG_VERSION"),
            config,
            result,
            wall_time_s: None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default)]
struct FullPrecision;

impl Formatter for FullPrecision {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }
}

/// Serializes `value` as compact JSON with 17-digit floats.
pub fn write_json<W: Write, T: Serialize + ?Sized>(mut out: W, value: &T) -> Result<()> {
    let mut ser = serde_json::Serializer::with_formatter(&mut out, FullPrecision);
    value.serialize(&mut ser).map_err(|e| Error::Parse(e.to_string()))?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    write_json(&mut buf, value)?;
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

/// Converts to a JSON tree, keeping full float precision.
pub fn to_value<T: Serialize + ?Sized>(value: &T) -> Result<Value> {
    serde_json::to_value(value).map_err(|e| Error::Parse(e.to_string()))
}

/// Looks up a dotted path such as `result.values.1`.
pub fn lookup<'a>(value: &'a Value, path: &str) -> Option<&'a Value> {
    if path.is_empty() {
        return Some(value);
    }
    let pointer: String = path.split('.').map(|seg| format!("/{seg}")).collect();
    value.pointer(&pointer)
}

/// Counts beyond u64 are written as decimal strings.
pub(crate) fn serialize_u128<S: serde::Serializer>(v: &u128, s: S) -> std::result::Result<S::Ok, S::Error> {
    match u64::try_from(*v) {
        Ok(small) => s.serialize_u64(small),
        Err(_) => s.collect_str(v),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, 2.0f64.sqrt(), 1e-300, 6.02e23, -0.0] {
            let s = to_json_string(&x).unwrap();
            let back: f64 = s.trim().parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{s}");
            let v: Value = serde_json::from_str(&s).unwrap();
            assert_eq!(v.as_f64().unwrap(), x);
        }
        assert_eq!(to_json_string(&f64::NAN).unwrap().trim(), "null");
    }

    #[test]
    fn seventeen_digits() {
        let s = to_json_string(&0.5).unwrap();
        assert_eq!(s.trim(), "5.0000000000000000e-1");
    }

    #[test]
    fn lookup_paths() {
        let v = json!({"result": {"values": [9, 18], "s": 0.5}});
        assert_eq!(lookup(&v, "result.values.1"), Some(&json!(18)));
        assert_eq!(lookup(&v, "result.s"), Some(&json!(0.5)));
        assert_eq!(lookup(&v, "result.missing"), None);
    }
}
