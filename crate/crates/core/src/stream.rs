//! Single-use lazy streams and the basic sources and sinks.

use std::fmt;
use std::ops::BitOr;

use crate::error::{Error, Result};
use crate::record::{FieldCell, Record};
use crate::value::{IntoFieldValue, Value};

/// A lazy, pull-based, possibly infinite sequence of `T` (records by
/// default).
///
/// Each element is a `Result`: failures surface when the failing element is
/// pulled, never when the pipeline is composed. Nothing upstream runs until
/// a sink pulls.
///
/// Streams are consumed by value, so a stream cannot be consumed twice:
///
/// ```compile_fail
/// use mdstream::{Stream, Value};
/// let s = Stream::from_values(vec![Value::Int(1)]).as_field("x");
/// let first = s.as_list();
/// let again = s.count(); // `s` was moved by `as_list`
/// ```
pub struct Stream<T = Record> {
    inner: Box<dyn Iterator<Item = Result<T>> + Send>,
}

impl<T: Send + 'static> Stream<T> {
    pub fn from_results<I>(iter: I) -> Self
    where
        I: IntoIterator<Item = Result<T>>,
        I::IntoIter: Send + 'static,
    {
        Stream {
            inner: Box::new(iter.into_iter()),
        }
    }

    pub fn from_items<I>(iter: I) -> Self
    where
        I: IntoIterator<Item = T>,
        I::IntoIter: Send + 'static,
    {
        Self::from_results(iter.into_iter().map(Ok))
    }

    pub fn empty() -> Self {
        Self::from_results(std::iter::empty())
    }

    /// A stream that yields `err` once and ends.
    pub fn failed(err: Error) -> Self {
        Self::from_results(std::iter::once(Err(err)))
    }

    /// Defers building a stream until its first element is pulled.
    ///
    /// Used by sources that open files and by stages that must see the whole
    /// upstream before emitting anything.
    pub fn deferred<F>(build: F) -> Self
    where
        F: FnOnce() -> Result<Stream<T>> + Send + 'static,
    {
        let mut pending = Some(build);
        let mut current: Option<Stream<T>> = None;
        Self::from_results(std::iter::from_fn(move || {
            if let Some(build) = pending.take() {
                match build() {
                    Ok(s) => current = Some(s),
                    Err(e) => return Some(Err(e)),
                }
            }
            current.as_mut()?.next()
        }))
    }

    /// Applies a stream-to-stream stage. Stages compose left to right.
    pub fn pipe<U, F>(self, stage: F) -> U
    where
        F: FnOnce(Self) -> U,
    {
        stage(self)
    }

    /// Keeps at most `n` elements, pulling upstream no more than `n` times.
    pub fn take(self, n: usize) -> Self {
        Self::from_results(self.inner.take(n))
    }

    /// Maps every successfully produced element.
    pub fn map_ok<U, F>(self, mut f: F) -> Stream<U>
    where
        U: Send + 'static,
        F: FnMut(T) -> Result<U> + Send + 'static,
    {
        Stream::from_results(self.inner.map(move |item| item.and_then(&mut f)))
    }

    /// Materializes the stream, stopping at the first error.
    pub fn as_list(self) -> Result<Vec<T>> {
        self.inner.collect()
    }

    /// Counts elements without inspecting them; fails on the first error
    /// element.
    pub fn count(self) -> Result<usize> {
        let mut n = 0;
        for item in self.inner {
            item?;
            n += 1;
        }
        Ok(n)
    }
}

impl Stream<Value> {
    pub fn from_values<I>(iter: I) -> Self
    where
        I: IntoIterator<Item = Value>,
        I::IntoIter: Send + 'static,
    {
        Self::from_items(iter)
    }

    /// Lifts every value into a single-field record `{name: value}`.
    pub fn as_field(self, name: impl Into<String>) -> Stream<Record> {
        let name = name.into();
        self.map_ok(move |v| Ok(Record::new().with(name.clone(), v)))
    }
}

impl Stream<Record> {
    pub fn from_records<I>(iter: I) -> Self
    where
        I: IntoIterator<Item = Record>,
        I::IntoIter: Send + 'static,
    {
        Self::from_items(iter)
    }

    /// Projects records back to plain values.
    ///
    /// A single name yields that field's values; several names yield
    /// `Value::List` tuples in the order given.
    pub fn select_field(self, names: impl Into<Fields>) -> Stream<Value> {
        let names = names.into();
        self.map_ok(move |r| names.read(&r))
    }

    /// Left fold over the forced values of `field`.
    pub fn fold<F, R>(self, field: &str, init: impl Into<Value>, mut f: F) -> Result<Value>
    where
        F: FnMut(Value, Value) -> R,
        R: IntoFieldValue,
    {
        let mut acc = init.into();
        for item in self.inner {
            let x = item?.get_field(field)?;
            acc = f(acc, x).into_field_value()?;
        }
        Ok(acc)
    }

    /// Running fold: each record gains `dst` holding the accumulator after
    /// folding in its own `src`.
    pub fn scan<F, R>(self, src: &str, dst: &str, init: impl Into<Value>, mut f: F) -> Self
    where
        F: FnMut(Value, Value) -> R + Send + 'static,
        R: IntoFieldValue,
    {
        let (src, dst) = (src.to_owned(), dst.to_owned());
        let mut acc = Some(init.into());
        self.map_ok(move |mut r| {
            let x = r.get_field(&src)?;
            let prev = acc.take().ok_or_else(|| {
                Error::custom("scan accumulator lost after an earlier failure")
            })?;
            let next = f(prev, x).into_field_value()?;
            acc = Some(next.clone());
            r.set_field(dst.clone(), FieldCell::eager(next));
            Ok(r)
        })
    }
}

impl<T> Iterator for Stream<T> {
    type Item = Result<T>;

    fn next(&mut self) -> Option<Self::Item> {
        self.inner.next()
    }
}

impl<T> fmt::Debug for Stream<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Stream { .. }")
    }
}

/// `stream | stage` is `stage(stream)`, giving pipelines the left-to-right
/// reading of shell pipes.
impl<T, U, F> BitOr<F> for Stream<T>
where
    F: FnOnce(Stream<T>) -> U,
{
    type Output = U;

    fn bitor(self, stage: F) -> U {
        stage(self)
    }
}

/// One field name or an ordered list of them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Fields {
    One(String),
    Many(Vec<String>),
}

impl Fields {
    pub fn names(&self) -> &[String] {
        match self {
            Fields::One(n) => std::slice::from_ref(n),
            Fields::Many(ns) => ns,
        }
    }

    /// Reads the named fields from `r`: the bare value for `One`, a list
    /// for `Many`.
    pub fn read(&self, r: &Record) -> Result<Value> {
        match self {
            Fields::One(n) => r.get_field(n),
            Fields::Many(ns) => ns
                .iter()
                .map(|n| r.get_field(n))
                .collect::<Result<Vec<_>>>()
                .map(Value::List),
        }
    }
}

impl From<&str> for Fields {
    fn from(s: &str) -> Self {
        Fields::One(s.to_owned())
    }
}

impl From<String> for Fields {
    fn from(s: String) -> Self {
        Fields::One(s)
    }
}

impl From<&String> for Fields {
    fn from(s: &String) -> Self {
        Fields::One(s.clone())
    }
}

impl From<&[&str]> for Fields {
    fn from(s: &[&str]) -> Self {
        Fields::Many(s.iter().map(|n| (*n).to_owned()).collect())
    }
}

impl<const N: usize> From<[&str; N]> for Fields {
    fn from(s: [&str; N]) -> Self {
        Fields::Many(s.iter().map(|n| (*n).to_owned()).collect())
    }
}

impl From<Vec<&str>> for Fields {
    fn from(s: Vec<&str>) -> Self {
        s.as_slice().into()
    }
}

impl From<Vec<String>> for Fields {
    fn from(s: Vec<String>) -> Self {
        Fields::Many(s)
    }
}

impl From<&[String]> for Fields {
    fn from(s: &[String]) -> Self {
        Fields::Many(s.to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    fn ints(xs: impl IntoIterator<Item = i64>) -> Stream {
        Stream::from_values(xs.into_iter().map(Value::Int).collect::<Vec<_>>()).as_field("x")
    }

    fn xs(s: Stream) -> Vec<Value> {
        s.select_field("x").as_list().unwrap()
    }

    /// Counts pulls from an endless source.
    fn probe(pulls: Arc<AtomicUsize>) -> Stream {
        Stream::from_items((0..).map(move |i: i64| {
            pulls.fetch_add(1, Ordering::SeqCst);
            Record::new().with("x", i)
        }))
    }

    #[test]
    fn pipe_identity_and_empty() {
        assert_eq!(xs(ints([1, 2, 3]).pipe(|s| s)), [1, 2, 3].map(Value::Int));
        let out = ints([]).pipe(|s| s.apply("x", "y", |v: Value| v));
        assert_eq!(out.count().unwrap(), 0);
    }

    #[test]
    fn bitor_composes_left_to_right() {
        let out = ints([1, 2, 3])
            | (|s: Stream| s.filter_field("x", |v| v.as_int().unwrap() != 2))
            | (|s: Stream| s.select_field("x"));
        assert_eq!(out.as_list().unwrap(), vec![Value::Int(1), Value::Int(3)]);
    }

    #[test]
    fn as_field_lifts() {
        let rs = Stream::from_values(vec![Value::from("a.jpg")])
            .as_field("filename")
            .as_list()
            .unwrap();
        assert_eq!(rs.len(), 1);
        assert_eq!(rs[0].field_names(), ["filename"]);
        assert_eq!(rs[0].get_field("filename").unwrap(), Value::from("a.jpg"));
        assert_eq!(Stream::from_values(vec![]).as_field("x").count().unwrap(), 0);
    }

    #[test]
    fn select_field_single_and_tuple() {
        let r = || Stream::from_records(vec![Record::new().with("x", 1).with("y", 2)]);
        assert_eq!(r().select_field("y").as_list().unwrap(), vec![Value::Int(2)]);
        assert_eq!(
            r().select_field(["y", "x"]).as_list().unwrap(),
            vec![Value::List(vec![Value::Int(2), Value::Int(1)])]
        );
    }

    #[test]
    fn select_field_fails_lazily_at_the_offending_element() {
        let mut s = Stream::from_records(vec![Record::new().with("x", 1), Record::new().with("y", 2)])
            .select_field("x");
        assert_eq!(s.next().unwrap().unwrap(), Value::Int(1));
        assert!(matches!(s.next(), Some(Err(Error::MissingField(f))) if f == "x"));
        assert!(s.next().is_none());
    }

    #[test]
    fn as_list_preserves_order() {
        let rs = ints(0..1000).as_list().unwrap();
        assert_eq!(rs.len(), 1000);
        assert_eq!(rs[999].get_field("x").unwrap(), Value::Int(999));
    }

    #[test]
    fn take_pulls_exactly() {
        let pulls = Arc::new(AtomicUsize::new(0));
        assert_eq!(probe(pulls.clone()).take(3).count().unwrap(), 3);
        assert_eq!(pulls.load(Ordering::SeqCst), 3);

        let pulls = Arc::new(AtomicUsize::new(0));
        assert_eq!(probe(pulls.clone()).take(0).count().unwrap(), 0);
        assert_eq!(pulls.load(Ordering::SeqCst), 0);

        assert_eq!(ints([]).take(5).count().unwrap(), 0);
        assert_eq!(probe(Arc::default()).take(7).count().unwrap(), 7);
    }

    #[test]
    fn fold_cases() {
        let add = |a: Value, b: Value| Value::Int(a.as_int().unwrap() + b.as_int().unwrap());
        assert_eq!(ints([1, 2, 3]).fold("x", 0, add).unwrap(), Value::Int(6));
        assert_eq!(ints([]).fold("x", 42, add).unwrap(), Value::Int(42));
        assert_eq!(ints(vec![1; 100]).fold("x", 0, add).unwrap(), Value::Int(100));
    }

    #[test]
    fn scan_cases() {
        let add = |a: Value, b: Value| Value::Int(a.as_int().unwrap() + b.as_int().unwrap());
        let out = ints([1, 2, 3]).scan("x", "acc", 0, add).select_field("acc");
        assert_eq!(out.as_list().unwrap(), [1, 3, 6].map(Value::Int));
        assert_eq!(ints([]).scan("x", "acc", 0, add).count().unwrap(), 0);

        let max = |a: Value, b: Value| Value::Int(a.as_int().unwrap().max(b.as_int().unwrap()));
        let out = ints([5]).scan("x", "acc", 10, max).select_field("acc");
        assert_eq!(out.as_list().unwrap(), vec![Value::Int(10)]);
    }

    #[test]
    fn count_forces_nothing() {
        let rs: Vec<Record> = (0..3)
            .map(|_| {
                Record::new()
                    .with_cell("l", FieldCell::lazy(|_| Value::Int(1)))
                    .with_cell("o", FieldCell::on_demand(|_| Value::Int(1)))
            })
            .collect();
        assert_eq!(Stream::from_records(rs.clone()).count().unwrap(), 3);
        for r in &rs {
            assert_eq!(r.eval_count("l"), Some(0));
            assert_eq!(r.eval_count("o"), Some(0));
        }
    }

    #[test]
    fn composition_pulls_nothing() {
        let pulls = Arc::new(AtomicUsize::new(0));
        let s = probe(pulls.clone())
            .apply("x", "y", |v: Value| v)
            .filter_field("x", |_| true)
            .delfield("y");
        assert_eq!(pulls.load(Ordering::SeqCst), 0);
        drop(s);
    }

    #[test]
    fn deferred_reports_build_errors_once() {
        let mut s: Stream = Stream::deferred(|| Err(Error::EmptyStream));
        assert!(matches!(s.next(), Some(Err(Error::EmptyStream))));
        assert!(s.next().is_none());
    }

    proptest! {
        #[test]
        fn two_stages_equal_their_composition(v in proptest::collection::vec(-1000i64..1000, 0..10)) {
            let f = |x: Value| Value::Int(x.as_int().unwrap() * 3);
            let g = |x: Value| Value::Int(x.as_int().unwrap() - 7);
            let staged = xs(ints(v.clone()).apply("x", "x", f).apply("x", "x", g));
            let fused = xs(ints(v.clone()).apply("x", "x", move |x| g(f(x))));
            let oracle: Vec<Value> = v.iter().map(|x| Value::Int(x * 3 - 7)).collect();
            prop_assert_eq!(&staged, &oracle);
            prop_assert_eq!(&fused, &oracle);
        }

        #[test]
        fn select_after_as_field_is_identity(v in proptest::collection::vec(any::<i64>(), 0..50)) {
            let vals: Vec<Value> = v.into_iter().map(Value::Int).collect();
            let back = Stream::from_values(vals.clone()).as_field("u").select_field("u").as_list().unwrap();
            prop_assert_eq!(back, vals);
        }

        #[test]
        fn scan_last_equals_fold(v in proptest::collection::vec(-1000i64..1000, 1..50)) {
            let add = |a: Value, b: Value| Value::Int(a.as_int().unwrap() + b.as_int().unwrap());
            let folded = ints(v.clone()).fold("x", 0, add).unwrap();
            let scanned = ints(v).scan("x", "acc", 0, add).select_field("acc").as_list().unwrap();
            prop_assert_eq!(scanned.last().unwrap(), &folded);
        }
    }
}
