//! Running the executable law checks against concrete functions.

use std::sync::Arc;

use mdstream::laws::{check_apply_bind, check_associativity, check_left_identity, check_right_identity, RecordFn, ValueFn};
use mdstream::{Record, Value};

pub fn run_example() -> mdstream::Result<()> {
    let records: Vec<Record> = (0..5).map(|i| Record::new().with("u", i).with("tag", format!("r{i}"))).collect();
    let values: Vec<Value> = (0..5).map(Value::from).collect();

    let describe: RecordFn = Arc::new(|x: Value| Ok(Record::new().with("parity", x.as_int()? % 2).with("text", x.to_string())));
    let inc: ValueFn = Arc::new(|x| Ok(Value::from(x.as_int()? + 1)));
    let double: ValueFn = Arc::new(|x| Ok(Value::from(x.as_int()? * 2)));

    let results = [
        ("left identity", check_left_identity(&values, "u", describe)),
        ("right identity", check_right_identity(&records, "u")?),
        ("associativity", check_associativity(&records, "u", "v", "w", inc.clone(), double)?),
        ("apply is bind", check_apply_bind(&records, "u", "v", inc)?),
    ];
    for (law, holds) in results {
        println!("{law:<15} {}", if holds { "holds" } else { "VIOLATED" });
        assert!(holds);
    }
    Ok(())
}

fn main() -> mdstream::Result<()> {
    run_example()
}
