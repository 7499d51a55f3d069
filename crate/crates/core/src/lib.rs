//! Lazy multi-field data streams.
//!
//! A [`Stream`] carries [`Record`]s: ordered sets of named fields, each
//! field holding either a stored value or a thunk evaluated lazily (once,
//! then memoized) or on demand (every access). Pipelines are built by
//! chaining combinators such as [`Stream::apply`], [`Stream::filter_field`]
//! and [`Stream::sliding_window`], and nothing runs until a sink pulls.
//!
//! ```
//! use mdstream::{FieldStrategy, Stream, Value};
//!
//! let squares = Stream::from_values((1..=4).map(Value::from).collect::<Vec<_>>())
//!     .as_field("x")
//!     .apply_with("x", "sq", FieldStrategy::LazyMemoized, |v: Value| {
//!         let x = v.as_int()?;
//!         Ok(Value::from(x * x))
//!     })
//!     .filter_field("x", |v| v.as_int().unwrap() % 2 == 0)
//!     .select_field("sq")
//!     .as_list()
//!     .unwrap();
//! assert_eq!(squares, vec![Value::from(4), Value::from(16)]);
//! ```
//!
//! Beyond the core combinators the crate has file sources
//! ([`sources`]), ML data preparation ([`ml`]), a disk cache for computed
//! fields ([`cache`]), executable monad-style laws ([`laws`]) and a small
//! CLI ([`cli`]).

pub mod cache;
pub mod cli;
mod combinators;
pub mod error;
pub mod laws;
pub mod ml;
pub mod record;
pub mod sources;
pub mod stream;
pub mod value;

pub use cache::{decode_value, encode_value, DiskCache};
pub use error::{Error, Result};
pub use ml::{Batch, DataSplit, SplitLabel, SummaryTable};
pub use record::{FieldCell, FieldStrategy, Record};
pub use stream::{Fields, Stream};
pub use value::{IntoFieldValue, Tensor, Value};
