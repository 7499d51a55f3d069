//! An image-classification data preparation pipeline over a directory with
//! one subdirectory per class: split, balance, inspect, load and batch.

use std::fs;
use std::path::Path;

use mdstream::sources::get_datastream;
use mdstream::{DataSplit, FieldStrategy, Stream, Tensor, Value};

fn make_dataset(root: &Path) -> std::io::Result<()> {
    for (class, count) in [("cats", 24), ("dogs", 16)] {
        fs::create_dir_all(root.join(class))?;
        for i in 0..count {
            fs::write(root.join(class).join(format!("{class}.{i:03}.jpg")), format!("{}", i % 7))?;
        }
    }
    Ok(())
}

/// Stands in for image decoding: a 2x2 "image" filled with the file's byte.
fn load_image(path: Value) -> mdstream::Result<Value> {
    let path = path.as_text()?;
    let text = fs::read_to_string(path).map_err(|e| mdstream::Error::io(path, e))?;
    let level: f64 = text.trim().parse().map_err(mdstream::Error::custom)?;
    Ok(Value::Tensor(Tensor::new(vec![2, 2], vec![level; 4])?))
}

fn augment(image: Value) -> mdstream::Result<Value> {
    Ok(Value::Tensor(image.as_tensor()?.map(|x| 255.0 - x)))
}

pub fn run_example() -> mdstream::Result<()> {
    let dir = tempfile::TempDir::new().map_err(|e| mdstream::Error::io("tempdir", e))?;
    make_dataset(dir.path()).map_err(|e| mdstream::Error::io(dir.path(), e))?;

    let (train, test) = get_datastream(dir.path(), Some(".jpg"), None)
        .datasplit(DataSplit::new(0.25, 2).with_split_file(dir.path().join("split.json")))
        .stratify_sample_tt("class_no", "split")
        .summary("class_no")
        .apply_with("filename", "image", FieldStrategy::LazyMemoized, load_image)
        .apply_with("image", "augmented", FieldStrategy::OnDemand, augment)
        .make_train_test_split("split")?;
    println!("train: {} records, test: {} records", train.len(), test.len());

    for (i, batch) in Stream::from_records(train).infshuffle(3).take(40).as_batch("augmented", "class_no", 16).enumerate() {
        let batch = batch?;
        println!("batch {i}: features {:?}, labels {:?}", batch.feature("augmented").unwrap().shape(), batch.labels.data());
    }
    Ok(())
}

fn main() -> mdstream::Result<()> {
    run_example()
}
