//! JSON values with floats written to 17 significant digits.

use std::str::FromStr;

use nalgebra::DMatrix;
use nilflow::format::fmt_f64;
use serde_json::{Map, Number, Value};

/// Non-finite values become `null`.
pub fn num(x: f64) -> Value {
    if !x.is_finite() {
        return Value::Null;
    }
    Value::Number(Number::from_str(&fmt_f64(x)).expect("formatted float is a JSON number"))
}

pub fn nums(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| num(x)).collect())
}

pub fn matrix(m: &DMatrix<f64>) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|r| Value::Array((0..m.ncols()).map(|c| num(m[(r, c)])).collect()))
            .collect(),
    )
}

pub fn opt(x: Option<f64>) -> Value {
    x.map_or(Value::Null, num)
}

/// Top-level document: schema version, configuration echo, result.
pub fn document(config: Value, result: Value) -> Value {
    let mut root = Map::new();
    root.insert("schema_version".into(), Value::from(1));
    root.insert("config".into(), config);
    root.insert("result".into(), result);
    Value::Object(root)
}

pub fn to_string(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values serialize");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_keep_seventeen_digits() {
        let v = num(0.1);
        assert_eq!(v.to_string(), "1.0000000000000001e-1");
        let back: f64 = v.to_string().parse().unwrap();
        assert_eq!(back, 0.1);
        assert_eq!(num(f64::NAN), Value::Null);
        assert_eq!(num(-0.5).to_string(), "-5.0000000000000000e-1");
    }

    #[test]
    fn document_key_order() {
        let d = document(Value::Null, Value::Null);
        let s = serde_json::to_string(&d).unwrap();
        assert_eq!(s, r#"{"schema_version":1,"config":null,"result":null}"#);
    }
}
