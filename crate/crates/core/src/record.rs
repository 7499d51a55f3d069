//! Multi-field records whose fields each carry an evaluation strategy.
//!
//! A field is one of:
//!
//! * [`FieldStrategy::Eager`]: the value is stored directly (called `Value`
//!   in the original Python library).
//! * [`FieldStrategy::LazyMemoized`]: a thunk runs on first access and its
//!   result is kept.
//! * [`FieldStrategy::OnDemand`]: a thunk runs on every access and nothing
//!   is kept, which is what makes per-epoch data augmentation work.
//!
//! Thunks receive the record they live in and look other fields up at force
//! time. Deleting a field that a pending thunk reads therefore surfaces as
//! [`Error::MissingField`] when the thunk is finally forced.

use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, OnceLock};

use indexmap::IndexMap;

use crate::error::{Error, Result};
use crate::value::{IntoFieldValue, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum FieldStrategy {
    #[default]
    Eager,
    LazyMemoized,
    OnDemand,
}

/// A deferred field computation. Thunks are expected to be pure, except for
/// `OnDemand` fields used for augmentation where re-evaluation is the point.
pub type Thunk = Arc<dyn Fn(&Record) -> Result<Value> + Send + Sync>;

struct CellState {
    thunk: Option<Thunk>,
    stored: OnceLock<Value>,
    evals: AtomicUsize,
}

/// One field of a [`Record`].
///
/// Cloning a cell shares its memo and its evaluation counter, so a record
/// re-emitted many times (as `infshuffle` does) still evaluates a
/// `LazyMemoized` field at most once.
#[derive(Clone)]
pub struct FieldCell {
    strategy: FieldStrategy,
    state: Arc<CellState>,
}

impl FieldCell {
    pub fn eager(value: impl Into<Value>) -> Self {
        let stored = OnceLock::new();
        let _ = stored.set(value.into());
        FieldCell {
            strategy: FieldStrategy::Eager,
            state: Arc::new(CellState {
                thunk: None,
                stored,
                evals: AtomicUsize::new(0),
            }),
        }
    }

    pub fn lazy<F, R>(f: F) -> Self
    where
        F: Fn(&Record) -> R + Send + Sync + 'static,
        R: IntoFieldValue,
    {
        Self::deferred(FieldStrategy::LazyMemoized, wrap(f))
    }

    pub fn on_demand<F, R>(f: F) -> Self
    where
        F: Fn(&Record) -> R + Send + Sync + 'static,
        R: IntoFieldValue,
    {
        Self::deferred(FieldStrategy::OnDemand, wrap(f))
    }

    /// Builds a cell from a thunk. `Eager` evaluates immediately against an
    /// empty record, so thunks for eager cells must not read other fields;
    /// use [`FieldCell::eager`] instead.
    pub fn from_thunk(strategy: FieldStrategy, thunk: Thunk) -> Result<Self> {
        match strategy {
            FieldStrategy::Eager => Ok(FieldCell::eager(thunk(&Record::new())?)),
            _ => Ok(Self::deferred(strategy, thunk)),
        }
    }

    pub(crate) fn deferred(strategy: FieldStrategy, thunk: Thunk) -> Self {
        debug_assert!(strategy != FieldStrategy::Eager);
        FieldCell {
            strategy,
            state: Arc::new(CellState {
                thunk: Some(thunk),
                stored: OnceLock::new(),
                evals: AtomicUsize::new(0),
            }),
        }
    }

    pub fn strategy(&self) -> FieldStrategy {
        self.strategy
    }

    /// Number of times this cell's thunk has run.
    pub fn eval_count(&self) -> usize {
        self.state.evals.load(Ordering::Relaxed)
    }

    /// True if a value is currently held (always for `Eager`, after the first
    /// successful force for `LazyMemoized`, never for `OnDemand`).
    pub fn is_stored(&self) -> bool {
        self.state.stored.get().is_some()
    }

    /// Evaluates the cell in the context of `record`.
    pub fn force(&self, record: &Record) -> Result<Value> {
        if let Some(v) = self.state.stored.get() {
            return Ok(v.clone());
        }
        let thunk = self
            .state
            .thunk
            .as_ref()
            .expect("non-eager cells always carry a thunk");
        self.state.evals.fetch_add(1, Ordering::Relaxed);
        let value = thunk(record)?;
        if self.strategy == FieldStrategy::LazyMemoized {
            // A re-entrant force may have filled the memo already; the first
            // stored value wins.
            let _ = self.state.stored.set(value);
            return Ok(self.state.stored.get().cloned().expect("just stored"));
        }
        Ok(value)
    }
}

fn wrap<F, R>(f: F) -> Thunk
where
    F: Fn(&Record) -> R + Send + Sync + 'static,
    R: IntoFieldValue,
{
    Arc::new(move |r: &Record| f(r).into_field_value())
}

impl fmt::Debug for FieldCell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut d = f.debug_struct("FieldCell");
        d.field("strategy", &self.strategy);
        match self.state.stored.get() {
            Some(v) => d.field("stored", v),
            None => d.field("stored", &Option::<Value>::None),
        };
        d.field("eval_count", &self.eval_count()).finish()
    }
}

/// An ordered collection of named fields (the `mdict`).
///
/// Field order is insertion order: new fields append, replaced fields keep
/// their position.
#[derive(Clone, Default)]
pub struct Record {
    cells: IndexMap<String, FieldCell>,
}

impl Record {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builder form of [`Record::set_field`] with an eager value.
    pub fn with(mut self, name: impl Into<String>, value: impl Into<Value>) -> Self {
        self.set_field(name, FieldCell::eager(value));
        self
    }

    pub fn with_cell(mut self, name: impl Into<String>, cell: FieldCell) -> Self {
        self.set_field(name, cell);
        self
    }

    pub fn get_field(&self, name: &str) -> Result<Value> {
        self.cell(name)
            .ok_or_else(|| Error::MissingField(name.to_owned()))?
            .force(self)
    }

    pub fn set_field(&mut self, name: impl Into<String>, cell: FieldCell) {
        let name = name.into();
        assert!(!name.is_empty(), "field names must be non-empty");
        self.cells.insert(name, cell);
    }

    /// Shorthand for setting an eager value.
    pub fn set_value(&mut self, name: impl Into<String>, value: impl Into<Value>) {
        self.set_field(name, FieldCell::eager(value));
    }

    pub fn delete_field(&mut self, name: &str) -> Result<FieldCell> {
        self.cells
            .shift_remove(name)
            .ok_or_else(|| Error::MissingField(name.to_owned()))
    }

    pub fn field_names(&self) -> Vec<&str> {
        self.cells.keys().map(String::as_str).collect()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.cells.contains_key(name)
    }

    pub fn cell(&self, name: &str) -> Option<&FieldCell> {
        self.cells.get(name)
    }

    pub fn eval_count(&self, name: &str) -> Option<usize> {
        self.cell(name).map(FieldCell::eval_count)
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cells(&self) -> impl Iterator<Item = (&str, &FieldCell)> {
        self.cells.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Moves every field of `other` into `self`; `other` wins on collision.
    pub fn merge(&mut self, other: Record) {
        for (name, cell) in other.cells {
            self.cells.insert(name, cell);
        }
    }

    /// Forces every field, in field order.
    ///
    /// The returned map compares equal to another regardless of key order.
    pub fn forced(&self) -> Result<IndexMap<String, Value>> {
        self.cells
            .iter()
            .map(|(k, cell)| Ok((k.clone(), cell.force(self)?)))
            .collect()
    }

    /// Forces everything and returns an all-eager copy.
    pub fn materialize(&self) -> Result<Record> {
        Ok(self
            .forced()?
            .into_iter()
            .fold(Record::new(), |r, (k, v)| r.with(k, v)))
    }
}

impl fmt::Debug for Record {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map().entries(self.cells.iter()).finish()
    }
}

impl<K: Into<String>, V: Into<Value>> FromIterator<(K, V)> for Record {
    fn from_iter<I: IntoIterator<Item = (K, V)>>(iter: I) -> Self {
        iter.into_iter().fold(Record::new(), |r, (k, v)| r.with(k, v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::sync::atomic::AtomicI64;

    fn counter() -> Arc<AtomicI64> {
        Arc::new(AtomicI64::new(0))
    }

    #[test]
    fn eager_get() {
        let r = Record::new().with("x", 3);
        assert_eq!(r.get_field("x").unwrap(), Value::Int(3));
        assert_eq!(r.eval_count("x"), Some(0));
    }

    #[test]
    fn lazy_memoized_evaluates_once() {
        let c = counter();
        let c2 = c.clone();
        let r = Record::new().with_cell(
            "x",
            FieldCell::lazy(move |_| {
                c2.fetch_add(1, Ordering::SeqCst);
                Value::Int(7)
            }),
        );
        assert!(!r.cell("x").unwrap().is_stored());
        for _ in 0..3 {
            assert_eq!(r.get_field("x").unwrap(), Value::Int(7));
        }
        assert_eq!(r.eval_count("x"), Some(1));
        assert_eq!(c.load(Ordering::SeqCst), 1);
        assert!(r.cell("x").unwrap().is_stored());
    }

    #[test]
    fn on_demand_evaluates_every_time() {
        let c = counter();
        let r = Record::new().with_cell(
            "x",
            FieldCell::on_demand(move |_| Value::Int(c.fetch_add(1, Ordering::SeqCst) + 1)),
        );
        let got: Vec<_> = (0..3).map(|_| r.get_field("x").unwrap()).collect();
        assert_eq!(got, vec![Value::Int(1), Value::Int(2), Value::Int(3)]);
        assert_eq!(r.eval_count("x"), Some(3));
        assert!(!r.cell("x").unwrap().is_stored());
    }

    #[test]
    fn failed_lazy_force_is_not_memoized() {
        let r = Record::new().with_cell("y", FieldCell::lazy(|r: &Record| r.get_field("x")));
        assert!(matches!(r.get_field("y"), Err(Error::MissingField(f)) if f == "x"));
        let mut r = r;
        r.set_value("x", 5);
        assert_eq!(r.get_field("y").unwrap(), Value::Int(5));
        assert_eq!(r.eval_count("y"), Some(2));
    }

    #[test]
    fn set_field_order() {
        let mut r = Record::new();
        r.set_value("x", 1);
        assert_eq!(r.field_names(), ["x"]);
        r.set_value("x", 2);
        assert_eq!(r.field_names(), ["x"]);
        assert_eq!(r.get_field("x").unwrap(), Value::Int(2));
        r.set_field("y", FieldCell::on_demand(|_| Value::Null));
        assert_eq!(r.field_names(), ["x", "y"]);

        let r = Record::new().with("b", 1).with("a", 2);
        assert_eq!(r.field_names(), ["b", "a"]);
        assert!(Record::new().field_names().is_empty());
    }

    #[test]
    fn replacing_keeps_position() {
        let mut r = Record::new().with("a", 1).with("b", 2).with("c", 3);
        r.set_value("b", 20);
        assert_eq!(r.field_names(), ["a", "b", "c"]);
    }

    #[test]
    fn delete_field_cases() {
        let mut r = Record::new().with("x", 1).with("y", 2);
        r.delete_field("x").unwrap();
        assert_eq!(r.field_names(), ["y"]);

        let mut r = Record::new().with("x", 1);
        assert!(matches!(r.delete_field("z"), Err(Error::MissingField(f)) if f == "z"));
    }

    #[test]
    fn deleted_source_breaks_pending_thunk() {
        let mut r = Record::new().with("x", 1).with_cell(
            "y",
            FieldCell::lazy(|r: &Record| Ok(Value::Int(r.get_field("x")?.as_int()? + 1))),
        );
        r.delete_field("x").unwrap();
        match r.get_field("y") {
            Err(Error::MissingField(f)) => assert_eq!(f, "x"),
            other => panic!("expected MissingField(x), got {other:?}"),
        }
    }

    #[test]
    fn lazy_chains_force_transitively() {
        let r = Record::new()
            .with("a", 2)
            .with_cell(
                "b",
                FieldCell::lazy(|r: &Record| Ok(Value::Int(r.get_field("a")?.as_int()? * 10))),
            )
            .with_cell(
                "c",
                FieldCell::lazy(|r: &Record| Ok(Value::Int(r.get_field("b")?.as_int()? + 1))),
            );
        assert_eq!(r.get_field("c").unwrap(), Value::Int(21));
        assert_eq!(r.eval_count("b"), Some(1));
        assert_eq!(r.get_field("b").unwrap(), Value::Int(20));
        assert_eq!(r.eval_count("b"), Some(1));
    }

    #[test]
    fn clones_share_memo() {
        let r = Record::new().with_cell("x", FieldCell::lazy(|_| Value::Int(1)));
        let r2 = r.clone();
        r.get_field("x").unwrap();
        r2.get_field("x").unwrap();
        assert_eq!(r2.eval_count("x"), Some(1));
    }

    #[test]
    fn records_are_send() {
        fn assert_send<T: Send + Sync>() {}
        assert_send::<Record>();
    }

    proptest! {
        #[test]
        fn lazy_eval_count_at_most_one(gets in 0usize..20) {
            let r = Record::new().with_cell("x", FieldCell::lazy(|_| Value::Int(1)));
            for _ in 0..gets {
                r.get_field("x").unwrap();
            }
            prop_assert!(r.eval_count("x").unwrap() <= 1);
            prop_assert_eq!(r.eval_count("x").unwrap(), gets.min(1));
        }

        #[test]
        fn on_demand_eval_count_equals_gets(gets in 0usize..20) {
            let r = Record::new().with_cell("x", FieldCell::on_demand(|_| Value::Int(1)));
            for _ in 0..gets {
                r.get_field("x").unwrap();
            }
            prop_assert_eq!(r.eval_count("x").unwrap(), gets);
        }

        #[test]
        fn set_then_delete_is_identity(vals in proptest::collection::vec(any::<i64>(), 0..6), extra in any::<i64>()) {
            let base: Record = vals.iter().enumerate().map(|(i, v)| (format!("f{i}"), *v)).collect();
            let mut r = base.clone();
            r.set_value("fresh", extra);
            r.delete_field("fresh").unwrap();
            prop_assert_eq!(r.forced().unwrap(), base.forced().unwrap());
            prop_assert_eq!(r.field_names(), base.field_names());
        }

        #[test]
        fn forcing_order_does_not_matter(order in Just(vec![0usize, 1, 2, 3]).prop_shuffle(), a in -1000i64..1000) {
            let build = || Record::new()
                .with("a", a)
                .with_cell("b", FieldCell::lazy(|r: &Record| Ok(Value::Int(r.get_field("a")?.as_int()? * 2))))
                .with_cell("c", FieldCell::on_demand(|r: &Record| Ok(Value::Int(r.get_field("b")?.as_int()? - 1))))
                .with_cell("d", FieldCell::lazy(|r: &Record| Ok(Value::List(vec![r.get_field("c")?, r.get_field("a")?]))));
            let names = ["a", "b", "c", "d"];
            let reference = build().forced().unwrap();
            let r = build();
            for i in order {
                prop_assert_eq!(&r.get_field(names[i]).unwrap(), &reference[names[i]]);
            }
        }
    }
}
