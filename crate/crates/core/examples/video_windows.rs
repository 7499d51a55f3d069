//! Frame-level video processing on synthetic frames: frame differences
//! with `delay`, short clips with `sliding_window`, and a batched
//! "model" with `apply_batch`.

use mdstream::{Error, Record, Stream, Tensor, Value};

const FRAMES: usize = 12;

fn frames() -> Stream {
    Stream::from_items((0..FRAMES).map(|t| {
        let pixels = (0..6).map(|p| (t * 10 + p) as f64).collect();
        Record::new().with("t", t).with("frame", Tensor::new(vec![2, 3], pixels).unwrap())
    }))
}

fn diff(pair: Value) -> mdstream::Result<Value> {
    let pair = pair.as_list()?;
    let (now, before) = (pair[0].as_tensor()?, pair[1].as_tensor()?);
    let data = now.data().iter().zip(before.data()).map(|(a, b)| a - b).collect();
    Ok(Value::Tensor(Tensor::new(now.shape().to_vec(), data)?))
}

/// Scores a batch of clips at once, as a vectorized model would.
fn score(clips: Vec<Value>) -> mdstream::Result<Vec<Value>> {
    clips
        .iter()
        .map(|c| {
            let t = c.as_tensor()?;
            Ok(Value::from(t.data().iter().sum::<f64>() / t.data().len() as f64))
        })
        .collect()
}

pub fn run_example() -> mdstream::Result<()> {
    let clips = frames()
        .delay("frame", "previous")
        .apply(["frame", "previous"], "motion", diff)
        .sliding_window(["frame", "motion"], 4)
        .apply_batch("frame", "score", 4, score)
        .as_list()?;

    println!("{} clips from {FRAMES} frames", clips.len());
    for clip in &clips {
        let frame = clip.get_field("frame")?;
        println!(
            "clip ending at t={:>2}: frames {:?}, score {:.1}",
            clip.get_field("t")?.as_int()?,
            frame.as_tensor()?.shape(),
            clip.get_field("score")?.as_f64()?,
        );
    }
    assert_eq!(clips.len(), FRAMES - 3);

    let broken = frames()
        .apply_batch("frame", "score", 5, |xs: Vec<Value>| Ok(xs.into_iter().skip(1).collect()))
        .as_list();
    match broken {
        Err(Error::BatchArity { expected, found }) => println!("bad batch function: {found} results for {expected} inputs"),
        other => panic!("unexpected {other:?}"),
    }
    Ok(())
}

fn main() -> mdstream::Result<()> {
    run_example()
}
