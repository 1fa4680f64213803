//! JSON encoding of V-values.
//!
//! A V-value is a JSON object. The key `"number"` holds the scalar
//! component, `"sample"` holds `{"element": "...", "sign": 1 | -1}`, every
//! other key holds a nested V-value. A bare JSON number is accepted wherever
//! a V-value is expected.

use dmm_core::vvalue::{canonicalize, RawValue, VError, NUMBER_KEY, SAMPLE_KEY};
use dmm_core::VValue;
use serde_json::{Map, Number, Value};

pub fn to_json(v: &VValue) -> Value {
    let mut map = Map::new();
    if v.number() != 0.0 {
        map.insert(NUMBER_KEY.into(), number(v.number()));
    }
    if let Some(s) = v.sample() {
        let mut sample = Map::new();
        sample.insert("element".into(), Value::String(s.element().to_string()));
        sample.insert("sign".into(), Value::from(s.sign().as_i8()));
        map.insert(SAMPLE_KEY.into(), Value::Object(sample));
    }
    for (label, child) in v.children() {
        map.insert(label.as_str().to_string(), to_json(child));
    }
    Value::Object(map)
}

fn number(c: f64) -> Value {
    Value::Number(Number::from_f64(c).expect("canonical values hold finite scalars"))
}

pub fn from_json(value: &Value) -> Result<VValue, VError> {
    canonicalize(&to_raw(value, &mut Vec::new())?)
}

fn to_raw(value: &Value, path: &mut Vec<String>) -> Result<RawValue, VError> {
    match value {
        Value::Number(n) => Ok(RawValue::Number(
            n.as_f64().ok_or_else(|| malformed(path, "number out of range"))?,
        )),
        Value::String(s) => Ok(RawValue::Text(s.clone())),
        Value::Object(map) => {
            let mut entries = Vec::with_capacity(map.len());
            for (k, v) in map {
                path.push(k.clone());
                entries.push((k.clone(), to_raw(v, path)?));
                path.pop();
            }
            Ok(RawValue::Map(entries))
        }
        Value::Null => Err(malformed(path, "null is not a V-value")),
        Value::Bool(_) => Err(malformed(path, "booleans are not V-values")),
        Value::Array(_) => Err(malformed(path, "arrays are not V-values")),
    }
}

fn malformed(path: &[String], reason: &str) -> VError {
    let mut p = String::from("$");
    for seg in path {
        p.push('.');
        p.push_str(seg);
    }
    VError::Malformed {
        path: p,
        reason: reason.to_string(),
    }
}

pub fn parse_str(text: &str) -> Result<VValue, String> {
    let value: Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
    from_json(&value).map_err(|e| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use dmm_core::{Label, Path, SampleLeaf, Sign};
    use serde_json::json;

    fn example() -> VValue {
        let terms = [
            (Path::empty(), 3.5),
            (Path::parse(["foo"]).unwrap(), 2.0),
            (Path::parse(["foo", "bar"]).unwrap(), 7.0),
            (Path::parse(["baz", "foo", "bar"]).unwrap(), -4.0),
        ];
        VValue::from_terms(terms.iter().map(|(p, c)| (p, *c))).unwrap()
    }

    #[test]
    fn encodes_explicit_numbers_in_insertion_order() {
        let text = serde_json::to_string(&to_json(&example())).unwrap();
        assert_eq!(
            text,
            r#"{"number":3.5,"foo":{"number":2.0,"bar":{"number":7.0}},"baz":{"foo":{"bar":{"number":-4.0}}}}"#
        );
    }

    #[test]
    fn accepts_bare_number_shorthand() {
        let v =
            from_json(&json!({"number": 3.5, "foo": {"number": 2, "bar": 7}, "baz": {"foo": {"bar": -4}}})).unwrap();
        assert_eq!(v, example());
        assert_eq!(from_json(&json!(2.5)).unwrap(), VValue::scalar(2.5).unwrap());
    }

    #[test]
    fn sample_leaves_round_trip() {
        let s = SampleLeaf::new("a", Sign::Minus).unwrap();
        let v = VValue::singleton(Label::new("x").unwrap(), VValue::sample_leaf(s));
        let j = to_json(&v);
        assert_eq!(j, json!({"x": {"sample": {"element": "a", "sign": -1}}}));
        assert_eq!(from_json(&j).unwrap(), v);
    }

    #[test]
    fn rejects_non_values() {
        assert!(from_json(&json!({"a": [1]})).is_err());
        assert!(from_json(&json!({"a": null})).is_err());
        assert!(from_json(&json!({"number": {"a": 1}})).is_err());
        assert!(from_json(&json!({"sample": {"element": "", "sign": 1}})).is_err());
    }

    #[test]
    fn zero_entries_are_pruned() {
        assert!(from_json(&json!({"a": {"b": 0}, "c": {}})).unwrap().is_zero());
    }
}
