//! The three field evaluation strategies, and what deleting a source field
//! does to a lazy field that still depends on it.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use mdstream::{Error, FieldCell, FieldStrategy, Record, Stream, Value};

pub fn run_example() -> mdstream::Result<()> {
    let runs = Arc::new(AtomicUsize::new(0));
    let counter = runs.clone();
    let record = Record::new()
        .with("name", "frame-001")
        .with_cell("mean", FieldCell::lazy(|r: &Record| -> mdstream::Result<Value> {
            let name = r.get_field("name")?;
            Ok(Value::from(name.as_text()?.len()))
        }))
        .with_cell("noise", FieldCell::on_demand(move |_: &Record| {
            Value::from(counter.fetch_add(1, Ordering::SeqCst))
        }));

    for _ in 0..3 {
        println!("mean = {}, noise = {}", record.get_field("mean")?, record.get_field("noise")?);
    }
    for name in record.field_names() {
        println!("{name}: evaluated {} times", record.eval_count(name).unwrap());
    }
    assert_eq!(record.eval_count("mean"), Some(1));
    assert_eq!(runs.load(Ordering::SeqCst), 3);

    let stage = |strategy| {
        Stream::from_records(vec![Record::new().with("raw", 21)])
            .apply_with("raw", "doubled", strategy, |v: Value| Ok(Value::from(v.as_int()? * 2)))
            .delfield("raw")
            .as_list()
    };
    let eager = stage(FieldStrategy::Eager)?;
    println!("eager apply, then delfield: doubled = {}", eager[0].get_field("doubled")?);
    let lazy = stage(FieldStrategy::LazyMemoized)?;
    match lazy[0].get_field("doubled") {
        Err(Error::MissingField(f)) => println!("lazy apply, then delfield: missing field `{f}`"),
        other => panic!("unexpected {other:?}"),
    }
    Ok(())
}

fn main() -> mdstream::Result<()> {
    run_example()
}
