//! Building a pipeline with `|`, then consuming it with a fold and a scan.

use mdstream::{Stream, Value};

fn numbers() -> Stream {
    Stream::from_values((1..=10).map(Value::from).collect::<Vec<_>>()).as_field("n")
}

pub fn run_example() -> mdstream::Result<()> {
    let odd_squares = numbers()
        | (|s: Stream| s.filter_field("n", |v| v.as_int().unwrap() % 2 == 1))
        | (|s: Stream| s.apply("n", "sq", |v: Value| Ok(Value::from(v.as_int()? * v.as_int()?))))
        | (|s: Stream| s.apply(["n", "sq"], "label", |v: Value| format!("{v}")));
    for record in odd_squares.as_list()? {
        println!("{:?}", record.forced()?);
    }

    let total = numbers().fold("n", 0, |acc: Value, x: Value| Ok(Value::from(acc.as_int()? + x.as_int()?)))?;
    println!("sum = {total}");

    let running: Vec<Value> = numbers()
        .scan("n", "running", 0, |acc: Value, x: Value| Ok(Value::from(acc.as_int()? + x.as_int()?)))
        .select_field("running")
        .as_list()?;
    println!("running sums = {running:?}");
    assert_eq!(running.last(), Some(&total));

    let first_three = numbers().take(3).select_field(["n"]).count()?;
    assert_eq!(first_three, 3);
    Ok(())
}

fn main() -> mdstream::Result<()> {
    run_example()
}
