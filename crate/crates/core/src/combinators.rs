//! Per-record and windowed stream transformations.

use std::collections::VecDeque;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::record::{FieldCell, FieldStrategy, Record, Thunk};
use crate::stream::{Fields, Stream};
use crate::value::{IntoFieldValue, Tensor, Value};

type ValueFn = Arc<dyn Fn(Value) -> Result<Value> + Send + Sync>;

impl Stream<Record> {
    /// Computes `dst` from `src` eagerly, as each record is pulled.
    ///
    /// With several source fields, `f` receives a `Value::List` of their
    /// values in the order given.
    pub fn apply<F, R>(self, src: impl Into<Fields>, dst: impl Into<String>, f: F) -> Self
    where
        F: Fn(Value) -> R + Send + Sync + 'static,
        R: IntoFieldValue,
    {
        self.apply_with(src, dst, FieldStrategy::Eager, f)
    }

    /// [`apply`](Stream::apply) with an explicit evaluation strategy.
    ///
    /// For `LazyMemoized` and `OnDemand`, `dst` holds a thunk that reads the
    /// sources from the record when forced. When `dst` is also a source, the
    /// thunk reads the cell it replaced.
    pub fn apply_with<F, R>(
        self,
        src: impl Into<Fields>,
        dst: impl Into<String>,
        strategy: FieldStrategy,
        f: F,
    ) -> Self
    where
        F: Fn(Value) -> R + Send + Sync + 'static,
        R: IntoFieldValue,
    {
        let src = Arc::new(src.into());
        let dst = dst.into();
        let f: ValueFn = Arc::new(move |v| f(v).into_field_value());
        let self_referential = src.names().contains(&dst);
        self.map_ok(move |mut r| {
            let cell = match strategy {
                FieldStrategy::Eager => FieldCell::eager(f(src.read(&r)?)?),
                _ => {
                    let shadow = if self_referential {
                        Some(r.cell(&dst).cloned().ok_or_else(|| Error::MissingField(dst.clone()))?)
                    } else {
                        None
                    };
                    let (src, dst, f) = (src.clone(), dst.clone(), f.clone());
                    let thunk: Thunk = Arc::new(move |rec: &Record| {
                        f(read_shadowed(&src, rec, &dst, shadow.as_ref())?)
                    });
                    FieldCell::deferred(strategy, thunk)
                }
            };
            r.set_field(dst.clone(), cell);
            Ok(r)
        })
    }

    /// Keeps records whose `src` value satisfies `pred`.
    pub fn filter_field<P>(self, src: &str, pred: P) -> Self
    where
        P: Fn(&Value) -> bool + Send + 'static,
    {
        let src = src.to_owned();
        Stream::from_results(self.filter_map(move |item| match item {
            Ok(r) => match r.get_field(&src) {
                Ok(v) if pred(&v) => Some(Ok(r)),
                Ok(_) => None,
                Err(e) => Some(Err(e)),
            },
            Err(e) => Some(Err(e)),
        }))
    }

    /// Removes fields from every record as it passes.
    ///
    /// Pending lazy fields that read a deleted field will fail when forced.
    pub fn delfield(self, names: impl Into<Fields>) -> Self {
        let names = names.into();
        self.map_ok(move |mut r| {
            for n in names.names() {
                r.delete_field(n)?;
            }
            Ok(r)
        })
    }

    /// Gives each record the previous record's `src` as `dst`.
    ///
    /// The first record has no predecessor and receives its own `src`.
    pub fn delay(self, src: &str, dst: &str) -> Self {
        let (src, dst) = (src.to_owned(), dst.to_owned());
        let mut prev: Option<Value> = None;
        self.map_ok(move |mut r| {
            let cur = r.get_field(&src)?;
            let delayed = prev.replace(cur.clone()).unwrap_or(cur);
            r.set_field(dst.clone(), FieldCell::eager(delayed));
            Ok(r)
        })
    }

    /// Runs `f` over groups of up to `batch_size` `src` values and spreads
    /// the results back into `dst`, preserving order.
    ///
    /// The final partial group is processed too. `f` must return exactly
    /// one value per input.
    pub fn apply_batch<F>(self, src: &str, dst: &str, batch_size: usize, f: F) -> Self
    where
        F: FnMut(Vec<Value>) -> Result<Vec<Value>> + Send + 'static,
    {
        if batch_size == 0 {
            return Stream::failed(Error::InvalidArgument("batch_size must be positive".into()));
        }
        let mut upstream = self;
        let mut f = f;
        let (src, dst) = (src.to_owned(), dst.to_owned());
        let mut ready: VecDeque<Result<Record>> = VecDeque::new();
        Stream::from_results(std::iter::from_fn(move || {
            if let Some(item) = ready.pop_front() {
                return Some(item);
            }
            // slot i holds either a record waiting for its result, or an error
            let mut slots: Vec<Result<Record>> = Vec::with_capacity(batch_size);
            let mut inputs = Vec::with_capacity(batch_size);
            let mut upstream_err = None;
            while inputs.len() < batch_size {
                match upstream.next() {
                    None => break,
                    Some(Err(e)) => {
                        upstream_err = Some(e);
                        break;
                    }
                    Some(Ok(r)) => match r.get_field(&src) {
                        Ok(v) => {
                            inputs.push(v);
                            slots.push(Ok(r));
                        }
                        Err(e) => slots.push(Err(e)),
                    },
                }
            }
            if !inputs.is_empty() {
                let n = inputs.len();
                match f(inputs) {
                    Ok(out) if out.len() == n => {
                        let mut out = out.into_iter();
                        for r in slots.iter_mut().flatten() {
                            r.set_field(dst.clone(), FieldCell::eager(out.next().expect("arity checked")));
                        }
                    }
                    Ok(out) => {
                        slots = vec![Err(Error::BatchArity { expected: n, found: out.len() })];
                    }
                    Err(e) => slots = vec![Err(e)],
                }
            }
            ready.extend(slots);
            ready.extend(upstream_err.map(Err));
            ready.pop_front()
        }))
    }

    /// Sliding windows of `size` consecutive records.
    ///
    /// Output `j` covers inputs `j..j+size`. Each listed field becomes a
    /// tensor stacked along a new leading axis of length `size`; all other
    /// fields come from the window's last record. Every listed value is
    /// forced exactly once and kept in a ring buffer.
    pub fn sliding_window(self, fields: impl Into<Fields>, size: usize) -> Self {
        if size == 0 {
            return Stream::failed(Error::InvalidArgument("window size must be positive".into()));
        }
        let fields = fields.into().names().to_vec();
        let mut rings: Vec<VecDeque<Tensor>> = vec![VecDeque::with_capacity(size); fields.len()];
        let mut shapes: Vec<Option<Vec<usize>>> = vec![None; fields.len()];
        let mut upstream = self;
        Stream::from_results(std::iter::from_fn(move || loop {
            let mut r = match upstream.next()? {
                Ok(r) => r,
                Err(e) => return Some(Err(e)),
            };
            let pushed = fields.iter().enumerate().try_for_each(|(i, name)| {
                let t = r.get_field(name)?.to_tensor()?;
                match &shapes[i] {
                    Some(s) if s.as_slice() != t.shape() => {
                        return Err(Error::ShapeMismatch {
                            field: name.clone(),
                            expected: s.clone(),
                            found: t.shape().to_vec(),
                        })
                    }
                    Some(_) => {}
                    None => shapes[i] = Some(t.shape().to_vec()),
                }
                if rings[i].len() == size {
                    rings[i].pop_front();
                }
                rings[i].push_back(t);
                Ok(())
            });
            if let Err(e) = pushed {
                return Some(Err(e));
            }
            if rings.iter().any(|ring| ring.len() < size) {
                continue;
            }
            for (name, ring) in fields.iter().zip(&rings) {
                let stacked = Tensor::stack(ring).expect("ring shapes checked on insert");
                r.set_field(name.clone(), FieldCell::eager(stacked));
            }
            return Some(Ok(r));
        }))
    }

    /// Keeps the elements whose 0-based position `i` has `i % n == k`.
    pub fn shard(self, k: usize, n: usize) -> Self {
        if n == 0 || k >= n {
            return Stream::failed(Error::BadShard { k, n });
        }
        Stream::from_results(
            self.enumerate()
                .filter(move |(i, _)| i % n == k)
                .map(|(_, item)| item),
        )
    }
}

fn read_shadowed(src: &Fields, rec: &Record, dst: &str, shadow: Option<&FieldCell>) -> Result<Value> {
    let read = |name: &str| match shadow {
        Some(cell) if name == dst => cell.force(rec),
        _ => rec.get_field(name),
    };
    match src {
        Fields::One(n) => read(n),
        Fields::Many(ns) => ns.iter().map(|n| read(n)).collect::<Result<Vec<_>>>().map(Value::List),
    }
}
