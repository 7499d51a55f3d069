//! Field-indexed monadic operations and executable checks of their laws.
//!
//! `as_field(u)` plays the role of `return`, and [`Stream::bind_field`] the
//! role of `>>=` indexed by a field name. `apply(u, v, f)` is the restricted
//! form `bind u (x -> {u: x, v: f(x)})`.
//!
//! The checks force every field and compare records as field-name to value
//! maps, ignoring evaluation strategies and field order. Each check has a
//! `_with` variant taking the operation under test, so broken
//! implementations can be shown to fail.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::record::Record;
use crate::stream::Stream;
use crate::value::Value;

/// `Value -> Record`, the function type accepted by bind.
pub type RecordFn = Arc<dyn Fn(Value) -> Result<Record> + Send + Sync>;

/// `Value -> Value`, the function type accepted by apply.
pub type ValueFn = Arc<dyn Fn(Value) -> Result<Value> + Send + Sync>;

/// A bind implementation under test.
pub type BindImpl = dyn Fn(Stream, &str, RecordFn) -> Stream;

impl Stream<Record> {
    /// For each record `m`, merges `f(m[u])` into `m`; fields produced by
    /// `f` win on collision.
    pub fn bind_field<F>(self, u: &str, f: F) -> Self
    where
        F: Fn(Value) -> Result<Record> + Send + 'static,
    {
        let u = u.to_owned();
        self.map_ok(move |mut m| {
            let r = f(m.get_field(&u)?)?;
            m.merge(r);
            Ok(m)
        })
    }
}

fn library_bind(s: Stream, u: &str, f: RecordFn) -> Stream {
    s.bind_field(u, move |x| f(x))
}

/// Record-wise equality of two finite record sequences after forcing.
/// Any error on either side counts as inequality.
pub fn same_records<A, B>(left: A, right: B) -> bool
where
    A: IntoIterator<Item = Result<Record>>,
    B: IntoIterator<Item = Result<Record>>,
{
    let force = |rs: Vec<Result<Record>>| -> Result<Vec<_>> { rs.into_iter().map(|r| r?.forced()).collect() };
    match (force(left.into_iter().collect()), force(right.into_iter().collect())) {
        (Ok(a), Ok(b)) => a == b,
        _ => false,
    }
}

/// `as_field(vs, u) >>=_u f` equals mapping `f` over `vs`, each result
/// merged over `{u: v}`.
pub fn check_left_identity(vs: &[Value], u: &str, f: RecordFn) -> bool {
    check_left_identity_with(&library_bind, vs, u, f)
}

pub fn check_left_identity_with(bind: &BindImpl, vs: &[Value], u: &str, f: RecordFn) -> bool {
    let lhs = bind(Stream::from_values(vs.to_vec()).as_field(u), u, f.clone());
    let rhs = vs.iter().map(|v| {
        let mut r = Record::new().with(u, v.clone());
        r.merge(f(v.clone())?);
        Ok(r)
    });
    same_records(lhs, rhs.collect::<Vec<_>>())
}

/// `rs >>=_u as_field(u)` equals `rs`.
pub fn check_right_identity(rs: &[Record], u: &str) -> Result<bool> {
    check_right_identity_with(&library_bind, rs, u)
}

pub fn check_right_identity_with(bind: &BindImpl, rs: &[Record], u: &str) -> Result<bool> {
    require(rs, u)?;
    let ret: RecordFn = {
        let u = u.to_owned();
        Arc::new(move |x| Ok(Record::new().with(u.clone(), x)))
    };
    let lhs = bind(Stream::from_records(rs.to_vec()), u, ret);
    Ok(same_records(lhs, rs.iter().cloned().map(Ok).collect::<Vec<_>>()))
}

/// `apply(u, v, f)` then `apply(v, w, g)` equals `apply(u, w, g . f)` once
/// the intermediate field `v` is deleted from the left side.
pub fn check_associativity(rs: &[Record], u: &str, v: &str, w: &str, f: ValueFn, g: ValueFn) -> Result<bool> {
    let composed: ValueFn = {
        let (f, g) = (f.clone(), g.clone());
        Arc::new(move |x| g(f(x)?))
    };
    check_associativity_with(rs, u, v, w, f, g, composed)
}

/// As [`check_associativity`], with the right-hand function supplied.
pub fn check_associativity_with(
    rs: &[Record],
    u: &str,
    v: &str,
    w: &str,
    f: ValueFn,
    g: ValueFn,
    composed: ValueFn,
) -> Result<bool> {
    require(rs, u)?;
    if rs.iter().any(|r| r.contains(v) || r.contains(w)) {
        return Ok(false);
    }
    let lhs = Stream::from_records(rs.to_vec())
        .apply(u, v, move |x| f(x))
        .apply(v, w, move |x| g(x))
        .delfield(v);
    let rhs = Stream::from_records(rs.to_vec()).apply(u, w, move |x| composed(x));
    Ok(same_records(lhs, rhs))
}

/// `apply(u, v, f)` equals `bind u (x -> {u: x, v: f(x)})`.
pub fn check_apply_bind(rs: &[Record], u: &str, v: &str, f: ValueFn) -> Result<bool> {
    require(rs, u)?;
    let via_apply = {
        let f = f.clone();
        Stream::from_records(rs.to_vec()).apply(u, v, move |x| f(x))
    };
    let (uu, vv) = (u.to_owned(), v.to_owned());
    let via_bind = Stream::from_records(rs.to_vec())
        .bind_field(u, move |x| Ok(Record::new().with(uu.clone(), x.clone()).with(vv.clone(), f(x)?)));
    Ok(same_records(via_apply, via_bind))
}

fn require(rs: &[Record], u: &str) -> Result<()> {
    match rs.iter().find(|r| !r.contains(u)) {
        Some(_) => Err(Error::MissingField(u.to_owned())),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn int(v: &Value) -> i64 {
        v.as_int().unwrap()
    }

    fn vf(f: impl Fn(i64) -> i64 + Send + Sync + 'static) -> ValueFn {
        Arc::new(move |x| Ok(Value::Int(f(int(&x)))))
    }

    #[test]
    fn bind_examples() {
        let rs = Stream::from_records(vec![Record::new().with("u", 2)])
            .bind_field("u", |x| Ok(Record::new().with("v", int(&x) + 1)))
            .as_list()
            .unwrap();
        assert_eq!(rs[0].field_names(), ["u", "v"]);
        assert_eq!(rs[0].get_field("v").unwrap(), Value::Int(3));

        let input = vec![Record::new().with("u", 2).with("z", "k")];
        let out = Stream::from_records(input.clone()).bind_field("u", |_| Ok(Record::new()));
        assert!(same_records(out, input.into_iter().map(Ok).collect::<Vec<_>>()));

        let mut s = Stream::from_records(vec![Record::new()]).bind_field("u", |_| Ok(Record::new()));
        assert!(matches!(s.next(), Some(Err(Error::MissingField(_)))));
    }

    #[test]
    fn left_identity_constant_and_broken() {
        let f: RecordFn = Arc::new(|_| Ok(Record::new().with("c", 1)));
        let vs = [1, 2, 3].map(Value::Int);
        assert!(check_left_identity(&vs, "u", f.clone()));

        let drops_u = |s: Stream, u: &str, f: RecordFn| {
            let u = u.to_owned();
            s.map_ok(move |m| f(m.get_field(&u)?))
        };
        assert!(!check_left_identity_with(&drops_u, &vs, "u", f));
    }

    #[test]
    fn right_identity_and_mutation() {
        let rs = vec![Record::new().with("u", 1).with("x", "a"), Record::new().with("u", 5).with("x", "b")];
        assert!(check_right_identity(&rs, "u").unwrap());

        let off_by_one = |s: Stream, u: &str, f: RecordFn| {
            let u = u.to_owned();
            s.bind_field(&u.clone(), move |x| f(Value::Int(int(&x) + 1)))
        };
        assert!(!check_right_identity_with(&off_by_one, &rs, "u").unwrap());
        assert!(check_right_identity(&[Record::new()], "u").is_err());
    }

    #[test]
    fn associativity_examples() {
        let rs = vec![Record::new().with("u", 3)];
        let (f, g) = (vf(|x| x + 1), vf(|x| x * 2));
        assert!(check_associativity(&rs, "u", "v", "w", f.clone(), g.clone()).unwrap());

        let id = vf(|x| x);
        assert!(check_associativity(&rs, "u", "v", "w", id.clone(), id).unwrap());

        // f after g: (3*2)+1 = 7, not 8
        let wrong: ValueFn = {
            let (f, g) = (f.clone(), g.clone());
            Arc::new(move |x| f(g(x)?))
        };
        assert!(!check_associativity_with(&rs, "u", "v", "w", f, g, wrong).unwrap());
    }

    #[test]
    fn apply_bind_correspondence() {
        let rs: Vec<Record> = (0..10).map(|i| Record::new().with("u", i).with("o", "x")).collect();
        assert!(check_apply_bind(&rs, "u", "v", vf(|x| x * x - 3)).unwrap());
    }
}
