//! Disk-backed `apply`: compute a field once, persist it as JSON, and load
//! it on later runs instead of recomputing.
//!
//! Layout: `<cache_dir>/<dst>/<encoded key>.json`, where the key is the
//! record's key field (`filename` by default) with every byte outside
//! `[A-Za-z0-9._-]` percent-encoded.
//!
//! File format, also used for tensors in JSONL interchange:
//!
//! ```text
//! {"v":1,"value":<value>}
//! ```
//!
//! where `<value>` is JSON for scalars, lists and maps, and tagged objects
//! for the rest:
//!
//! * tensor: `{"t":"tensor","shape":[..],"data":[..]}`
//! * non-finite float: `{"t":"float","value":"NaN"|"inf"|"-inf"}`
//! * a map that itself has a `"t"` key: `{"t":"map","value":{..}}`
//!
//! Non-finite tensor elements are written as the strings `"NaN"`, `"inf"`
//! and `"-inf"`. Finite floats use the shortest representation that parses
//! back to the same bits and always carry a `.` or exponent, so they never
//! decode as ints.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Number};

use crate::error::{Error, Result};
use crate::record::{FieldCell, Record};
use crate::stream::{Fields, Stream};
use crate::value::{IntoFieldValue, Tensor, Value};

const FORMAT_VERSION: u64 = 1;

pub fn encode_value(v: &Value) -> Vec<u8> {
    let doc = json!({ "v": FORMAT_VERSION, "value": value_to_json(v) });
    serde_json::to_vec(&doc).expect("JSON values always serialize")
}

pub fn decode_value(bytes: &[u8]) -> Result<Value> {
    let corrupt = |reason: String| Error::CacheCorrupt { path: None, reason };
    let doc: serde_json::Value =
        serde_json::from_slice(bytes).map_err(|e| corrupt(format!("malformed JSON: {e}")))?;
    let obj = doc.as_object().ok_or_else(|| corrupt("top level is not an object".into()))?;
    match obj.get("v").and_then(serde_json::Value::as_u64) {
        Some(FORMAT_VERSION) => {}
        Some(v) => return Err(corrupt(format!("unsupported version {v}"))),
        None => return Err(corrupt("missing version".into())),
    }
    let value = obj.get("value").ok_or_else(|| corrupt("missing value".into()))?;
    value_from_json(value).map_err(corrupt)
}

/// Tagged JSON form of a value, without the versioned envelope.
pub fn value_to_json(v: &Value) -> serde_json::Value {
    use serde_json::Value as J;
    match v {
        Value::Null => J::Null,
        Value::Bool(b) => J::Bool(*b),
        Value::Int(i) => J::from(*i),
        Value::Float(x) => match Number::from_f64(*x) {
            Some(n) => J::Number(n),
            None => json!({ "t": "float", "value": non_finite_name(*x) }),
        },
        Value::Text(s) => J::String(s.clone()),
        Value::Tensor(t) => json!({
            "t": "tensor",
            "shape": t.shape(),
            "data": t.data().iter().map(|&x| tensor_elem(x)).collect::<Vec<_>>(),
        }),
        Value::List(items) => J::Array(items.iter().map(value_to_json).collect()),
        Value::Map(map) => {
            let obj: Map<String, J> = map.iter().map(|(k, v)| (k.clone(), value_to_json(v))).collect();
            if map.contains_key("t") {
                json!({ "t": "map", "value": obj })
            } else {
                J::Object(obj)
            }
        }
    }
}

/// Inverse of [`value_to_json`]. Errors are plain messages; callers attach
/// context.
pub fn value_from_json(j: &serde_json::Value) -> std::result::Result<Value, String> {
    use serde_json::Value as J;
    Ok(match j {
        J::Null => Value::Null,
        J::Bool(b) => Value::Bool(*b),
        J::Number(n) => number_to_value(n),
        J::String(s) => Value::Text(s.clone()),
        J::Array(items) => Value::List(items.iter().map(value_from_json).collect::<std::result::Result<_, _>>()?),
        J::Object(obj) => match obj.get("t") {
            None => Value::Map(decode_entries(obj)?),
            Some(J::String(tag)) => match tag.as_str() {
                "tensor" => Value::Tensor(decode_tensor(obj)?),
                "float" => {
                    let name = obj.get("value").and_then(J::as_str).ok_or("float tag without value")?;
                    Value::Float(parse_non_finite(name).ok_or_else(|| format!("bad float `{name}`"))?)
                }
                "map" => match obj.get("value") {
                    Some(J::Object(inner)) => Value::Map(decode_entries(inner)?),
                    _ => return Err("map tag without object value".into()),
                },
                other => return Err(format!("unknown tag `{other}`")),
            },
            Some(_) => return Err("tag `t` is not a string".into()),
        },
    })
}

pub(crate) fn number_to_value(n: &Number) -> Value {
    match n.as_i64() {
        Some(i) => Value::Int(i),
        None => Value::Float(n.as_f64().unwrap_or(f64::NAN)),
    }
}

fn decode_entries(obj: &Map<String, serde_json::Value>) -> std::result::Result<BTreeMap<String, Value>, String> {
    obj.iter().map(|(k, v)| Ok((k.clone(), value_from_json(v)?))).collect()
}

fn decode_tensor(obj: &Map<String, serde_json::Value>) -> std::result::Result<Tensor, String> {
    let shape = obj
        .get("shape")
        .and_then(|s| s.as_array())
        .ok_or("tensor without shape")?
        .iter()
        .map(|d| d.as_u64().map(|d| d as usize).ok_or("tensor shape must hold non-negative ints"))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let data = obj
        .get("data")
        .and_then(|d| d.as_array())
        .ok_or("tensor without data")?
        .iter()
        .map(|x| match x {
            serde_json::Value::Number(n) => n.as_f64().ok_or_else(|| "bad tensor element".to_string()),
            serde_json::Value::String(s) => parse_non_finite(s).ok_or_else(|| format!("bad tensor element `{s}`")),
            _ => Err("bad tensor element".to_string()),
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let expected: usize = shape.iter().product();
    if expected != data.len() {
        return Err(format!("tensor of shape {shape:?} has {} elements, expected {expected}", data.len()));
    }
    Ok(Tensor::new(shape, data).expect("length checked"))
}

fn tensor_elem(x: f64) -> serde_json::Value {
    match Number::from_f64(x) {
        Some(n) => serde_json::Value::Number(n),
        None => serde_json::Value::String(non_finite_name(x).into()),
    }
}

fn non_finite_name(x: f64) -> &'static str {
    if x.is_nan() {
        "NaN"
    } else if x > 0.0 {
        "inf"
    } else {
        "-inf"
    }
}

fn parse_non_finite(s: &str) -> Option<f64> {
    match s {
        "NaN" => Some(f64::NAN),
        "inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        _ => None,
    }
}

/// Percent-encodes every byte outside `[A-Za-z0-9._-]`.
pub fn sanitize_key(key: &str) -> String {
    let mut out = String::with_capacity(key.len());
    for b in key.bytes() {
        if b.is_ascii_alphanumeric() || matches!(b, b'.' | b'_' | b'-') {
            out.push(b as char);
        } else {
            out.push_str(&format!("%{b:02X}"));
        }
    }
    out
}

/// Where and under which key field computed values are cached.
#[derive(Debug, Clone)]
pub struct DiskCache {
    dir: PathBuf,
    key_field: String,
}

impl DiskCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        DiskCache {
            dir: dir.into(),
            key_field: "filename".into(),
        }
    }

    pub fn with_key_field(mut self, key_field: impl Into<String>) -> Self {
        self.key_field = key_field.into();
        self
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn key_field(&self) -> &str {
        &self.key_field
    }

    pub fn path_for(&self, dst: &str, key: &str) -> PathBuf {
        self.dir.join(sanitize_key(dst)).join(format!("{}.json", sanitize_key(key)))
    }

    /// `Ok(None)` on a miss; a present but undecodable file is an error.
    pub fn load(&self, dst: &str, key: &str) -> Result<Option<Value>> {
        let path = self.path_for(dst, key);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(Error::io(path, e)),
        };
        decode_value(&bytes).map(Some).map_err(|e| match e {
            Error::CacheCorrupt { reason, .. } => Error::CacheCorrupt { path: Some(path), reason },
            other => other,
        })
    }

    /// Writes through a temporary file in the same directory and renames it
    /// into place, so readers never observe a partial entry.
    pub fn store(&self, dst: &str, key: &str, value: &Value) -> Result<PathBuf> {
        let path = self.path_for(dst, key);
        let parent = path.parent().expect("cache paths have a parent");
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        let mut tmp = tempfile::NamedTempFile::new_in(parent).map_err(|e| Error::io(parent, e))?;
        tmp.write_all(&encode_value(value)).map_err(|e| Error::io(tmp.path(), e))?;
        tmp.persist(&path).map_err(|e| Error::io(&path, e.error))?;
        Ok(path)
    }
}

impl Stream<Record> {
    /// Like [`apply`](Stream::apply), but results are persisted per record
    /// key and reused on later runs without calling `f`.
    pub fn apply_cached<F, R>(self, src: impl Into<Fields>, dst: &str, cache: DiskCache, f: F) -> Self
    where
        F: Fn(Value) -> R + Send + 'static,
        R: IntoFieldValue,
    {
        let src = src.into();
        let dst = dst.to_owned();
        self.map_ok(move |mut r| {
            let key = match r.get_field(&cache.key_field)? {
                Value::Text(s) => s,
                other => {
                    return Err(Error::TypeMismatch {
                        expected: "text key",
                        found: other.type_name(),
                    })
                }
            };
            let value = match cache.load(&dst, &key)? {
                Some(v) => v,
                None => {
                    let v = f(src.read(&r)?).into_field_value()?;
                    cache.store(&dst, &key, &v)?;
                    v
                }
            };
            r.set_field(dst.clone(), FieldCell::eager(value));
            Ok(r)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn encoded(v: &Value) -> String {
        String::from_utf8(encode_value(v)).unwrap()
    }

    #[test]
    fn encode_examples() {
        assert_eq!(encoded(&Value::Int(3)), r#"{"v":1,"value":3}"#);
        assert_eq!(
            encoded(&Value::Tensor(Tensor::vector(vec![1.0, 2.0]))),
            r#"{"v":1,"value":{"t":"tensor","shape":[2],"data":[1.0,2.0]}}"#
        );
        assert_eq!(encoded(&Value::Null), r#"{"v":1,"value":null}"#);
    }

    #[test]
    fn decode_rejects_bad_input() {
        assert!(matches!(decode_value(br#"{"v":2,"value":3}"#), Err(Error::CacheCorrupt { .. })));
        assert!(matches!(
            decode_value(br#"{"v":1,"value":{"t":"tensor","shape":[3],"data":[1.0]}}"#),
            Err(Error::CacheCorrupt { .. })
        ));
        assert!(matches!(decode_value(br#"{"v":1,"val"#), Err(Error::CacheCorrupt { .. })));
    }

    #[test]
    fn float_and_int_stay_distinct() {
        for v in [Value::Float(3.0), Value::Int(3), Value::Float(-0.0), Value::Float(1e300)] {
            assert_eq!(decode_value(&encode_value(&v)).unwrap(), v);
        }
    }

    #[test]
    fn non_finite_floats_round_trip() {
        for x in [f64::INFINITY, f64::NEG_INFINITY] {
            assert_eq!(decode_value(&encode_value(&Value::Float(x))).unwrap(), Value::Float(x));
        }
        match decode_value(&encode_value(&Value::Float(f64::NAN))).unwrap() {
            Value::Float(x) => assert!(x.is_nan()),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn maps_with_tag_key_are_escaped() {
        let mut m = BTreeMap::new();
        m.insert("t".to_string(), Value::from("tensor"));
        m.insert("shape".to_string(), Value::List(vec![]));
        let v = Value::Map(m);
        assert_eq!(decode_value(&encode_value(&v)).unwrap(), v);
    }

    #[test]
    fn sanitize_examples() {
        assert_eq!(sanitize_key("a/b.mp4"), "a%2Fb.mp4");
        assert_eq!(sanitize_key("x y_z-1.JPG"), "x%20y_z-1.JPG");
        assert_eq!(sanitize_key("é"), "%C3%A9");
    }

    fn arb_value() -> impl Strategy<Value = Value> {
        let leaf = prop_oneof![
            Just(Value::Null),
            any::<bool>().prop_map(Value::Bool),
            any::<i64>().prop_map(Value::Int),
            any::<f64>().prop_filter("NaN never compares equal", |x| !x.is_nan()).prop_map(Value::Float),
            ".*".prop_map(Value::Text),
            proptest::collection::vec(-1e6f64..1e6, 0..6)
                .prop_map(|d| Value::Tensor(Tensor::new(vec![d.len()], d).unwrap())),
        ];
        leaf.prop_recursive(3, 24, 4, |inner| {
            prop_oneof![
                proptest::collection::vec(inner.clone(), 0..4).prop_map(Value::List),
                proptest::collection::btree_map("[a-z]{1,3}", inner, 0..4).prop_map(Value::Map),
            ]
        })
    }

    proptest! {
        #[test]
        fn round_trip(v in arb_value()) {
            prop_assert_eq!(decode_value(&encode_value(&v)).unwrap(), v);
        }
    }
}
