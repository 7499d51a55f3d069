//! Splitting one stream across workers with `shard`, then merging the
//! per-worker results back into the original order.

use std::thread;

use mdstream::{Stream, Value};

const WORKERS: usize = 3;

fn source() -> Stream {
    Stream::from_values((0..10).map(Value::from).collect::<Vec<_>>()).as_field("id")
}

pub fn run_example() -> mdstream::Result<()> {
    let handles: Vec<_> = (0..WORKERS)
        .map(|k| {
            thread::spawn(move || -> mdstream::Result<Vec<(i64, i64)>> {
                source()
                    .shard(k, WORKERS)
                    .apply("id", "cube", |v: Value| Ok(Value::from(v.as_int()?.pow(3))))
                    .as_list()?
                    .iter()
                    .map(|r| Ok((r.get_field("id")?.as_int()?, r.get_field("cube")?.as_int()?)))
                    .collect()
            })
        })
        .collect();

    let mut merged = Vec::new();
    for (k, h) in handles.into_iter().enumerate() {
        let part = h.join().expect("worker panicked")?;
        println!("worker {k}: ids {:?}", part.iter().map(|p| p.0).collect::<Vec<_>>());
        merged.extend(part);
    }
    merged.sort();
    println!("merged: {merged:?}");
    assert_eq!(merged.len(), 10);
    Ok(())
}

fn main() -> mdstream::Result<()> {
    run_example()
}
