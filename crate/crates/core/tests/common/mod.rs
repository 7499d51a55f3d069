#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use mdstream::laws::{RecordFn, ValueFn};
use mdstream::{Record, Stream, Tensor, Value};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// A source of `n` records `{i: index}` that counts how often it is pulled.
pub fn instrumented(n: usize) -> (Stream, Arc<AtomicUsize>) {
    let pulls = Arc::new(AtomicUsize::new(0));
    let p = pulls.clone();
    let s = Stream::from_items((0..n).map(move |i| {
        p.fetch_add(1, Ordering::SeqCst);
        Record::new().with("i", i)
    }));
    (s, pulls)
}

pub fn ints(xs: impl IntoIterator<Item = i64>) -> Stream {
    Stream::from_values(xs.into_iter().map(Value::Int).collect::<Vec<_>>()).as_field("x")
}

pub fn random_scalar(rng: &mut ChaCha8Rng) -> Value {
    match rng.gen_range(0..4) {
        0 => Value::Int(rng.gen_range(-1000..1000)),
        1 => Value::Float(rng.gen_range(-100.0..100.0)),
        2 => Value::Text(random_text(rng)),
        _ => Value::Bool(rng.gen()),
    }
}

pub fn random_text(rng: &mut ChaCha8Rng) -> String {
    let len = rng.gen_range(0..6);
    (0..len).map(|_| *b"abz_7".choose(rng).unwrap() as char).collect()
}

/// Random values up to `depth` levels of nesting, with finite floats only.
pub fn random_value(rng: &mut ChaCha8Rng, depth: u32) -> Value {
    let top = if depth == 0 { 6 } else { 8 };
    match rng.gen_range(0..top) {
        0 => Value::Null,
        1 => Value::Bool(rng.gen()),
        2 => Value::Int(rng.gen()),
        3 => {
            let bits: u64 = rng.gen();
            let x = f64::from_bits(bits);
            Value::Float(if x.is_nan() { 0.5 } else { x })
        }
        4 => Value::Text(random_text(rng)),
        5 => {
            let rank = rng.gen_range(0..3);
            let shape: Vec<usize> = (0..rank).map(|_| rng.gen_range(0..4)).collect();
            let n = shape.iter().product();
            let data = (0..n).map(|_| rng.gen_range(-1e9..1e9)).collect();
            Value::Tensor(Tensor::new(shape, data).unwrap())
        }
        6 => Value::List((0..rng.gen_range(0..4)).map(|_| random_value(rng, depth - 1)).collect()),
        _ => {
            let keys = ["t", "a", "shape", "value", "k"];
            let map: BTreeMap<String, Value> = (0..rng.gen_range(0..4))
                .map(|_| (keys.choose(rng).unwrap().to_string(), random_value(rng, depth - 1)))
                .collect();
            Value::Map(map)
        }
    }
}

/// A record of 1..=5 scalar fields that always contains `u`.
pub fn random_record(rng: &mut ChaCha8Rng, u: &str) -> Record {
    let mut r = Record::new().with(u, random_scalar(rng));
    for i in 0..rng.gen_range(0..5) {
        r.set_value(format!("f{i}"), random_scalar(rng));
    }
    r
}

/// A fixed family of total, pure value functions.
#[derive(Debug, Clone)]
pub enum Family {
    AddInt(i64),
    MulInt(i64),
    Tag(String),
    Wrap,
    Describe,
    Const(Value),
}

impl Family {
    pub fn random(rng: &mut ChaCha8Rng) -> Family {
        match rng.gen_range(0..6) {
            0 => Family::AddInt(rng.gen_range(-10..10)),
            1 => Family::MulInt(rng.gen_range(-3..4)),
            2 => Family::Tag(random_text(rng)),
            3 => Family::Wrap,
            4 => Family::Describe,
            _ => Family::Const(random_scalar(rng)),
        }
    }

    pub fn eval(&self, v: Value) -> Value {
        match (self, v) {
            (Family::AddInt(k), Value::Int(i)) => Value::Int(i.wrapping_add(*k)),
            (Family::AddInt(k), Value::Float(x)) => Value::Float(x + *k as f64),
            (Family::MulInt(k), Value::Int(i)) => Value::Int(i.wrapping_mul(*k)),
            (Family::MulInt(k), Value::Float(x)) => Value::Float(x * *k as f64),
            (Family::AddInt(_) | Family::MulInt(_), other) => other,
            (Family::Tag(t), v) => Value::Text(format!("{t}:{v}")),
            (Family::Wrap, v) => Value::List(vec![v]),
            (Family::Describe, v) => Value::Text(v.type_name().to_owned()),
            (Family::Const(c), _) => c.clone(),
        }
    }

    pub fn value_fn(&self) -> ValueFn {
        let f = self.clone();
        Arc::new(move |v| Ok(f.eval(v)))
    }
}

/// A random `Value -> Record` producing one or two fields from the family.
pub fn random_record_fn(rng: &mut ChaCha8Rng) -> RecordFn {
    let names = ["v", "w", "u", "z"];
    let outputs: Vec<(String, Family)> = (0..rng.gen_range(1..=2))
        .map(|_| (names.choose(rng).unwrap().to_string(), Family::random(rng)))
        .collect();
    Arc::new(move |x: Value| {
        Ok(outputs
            .iter()
            .fold(Record::new(), |r, (name, f)| r.with(name.clone(), f.eval(x.clone()))))
    })
}
