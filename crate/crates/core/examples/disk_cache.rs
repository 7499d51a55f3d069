//! Caching an expensive per-record computation on disk, keyed by filename.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use mdstream::{DiskCache, Record, Stream, Tensor, Value};

fn clips() -> Stream {
    Stream::from_records((0..4).map(|i| Record::new().with("filename", format!("clips/clip{i}.mp4")).with("len", 30 + i)).collect::<Vec<_>>())
}

pub fn run_example() -> mdstream::Result<()> {
    let dir = tempfile::TempDir::new().map_err(|e| mdstream::Error::io("tempdir", e))?;
    let cache = DiskCache::new(dir.path());
    let calls = Arc::new(AtomicUsize::new(0));

    for run in ["cold", "warm"] {
        let counter = calls.clone();
        let features = clips()
            .apply_cached("len", "features", cache.clone(), move |v: Value| {
                counter.fetch_add(1, Ordering::SeqCst);
                let n = v.as_f64()?;
                Ok(Value::Tensor(Tensor::vector(vec![n, n / 2.0, n.sqrt()])))
            })
            .select_field("features")
            .as_list()?;
        println!("{run} run: {} records, feature extractor called {} times so far", features.len(), calls.load(Ordering::SeqCst));
    }
    assert_eq!(calls.load(Ordering::SeqCst), 4);

    let path = cache.path_for("features", "clips/clip0.mp4");
    println!("{}:\n{}", path.display(), std::fs::read_to_string(&path).map_err(|e| mdstream::Error::io(&path, e))?);
    Ok(())
}

fn main() -> mdstream::Result<()> {
    run_example()
}
