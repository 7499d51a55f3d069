//! Reading and writing CSV and JSON Lines record files.

use std::fs;

use mdstream::sources::{csvsource, jsonstream, write_csv, write_jsonl};
use mdstream::Value;

/// CSV cells arrive as text; numeric columns are parsed by the pipeline.
fn decade(age: Value) -> mdstream::Result<Value> {
    let years: i64 = age.as_text()?.parse().map_err(mdstream::Error::custom)?;
    Ok(Value::from(years / 10 * 10))
}

pub fn run_example() -> mdstream::Result<()> {
    let dir = tempfile::TempDir::new().map_err(|e| mdstream::Error::io("tempdir", e))?;
    let csv = dir.path().join("people.csv");
    fs::write(&csv, "name,age,city\nAda,36,London\nAlan,41,\"Wilmslow, Cheshire\"\n").map_err(|e| mdstream::Error::io(&csv, e))?;

    let jsonl = dir.path().join("people.jsonl");
    let n = write_jsonl(&jsonl, csvsource(&csv).apply("age", "decade", decade))?;
    println!("wrote {n} records:\n{}", fs::read_to_string(&jsonl).map_err(|e| mdstream::Error::io(&jsonl, e))?);

    let back = dir.path().join("people.out.csv");
    write_csv(&back, jsonstream(&jsonl).delfield("decade"))?;
    print!("{}", fs::read_to_string(&back).map_err(|e| mdstream::Error::io(&back, e))?);

    let ragged = dir.path().join("ragged.csv");
    fs::write(&ragged, "a,b\n1,2\n3\n").map_err(|e| mdstream::Error::io(&ragged, e))?;
    match csvsource(&ragged).as_list() {
        Err(e) => println!("ragged input: {e}"),
        Ok(_) => panic!("ragged input accepted"),
    }
    Ok(())
}

fn main() -> mdstream::Result<()> {
    run_example()
}
