//! Data preparation for supervised learning: train/valid/test splitting,
//! class balancing, summaries, endless shuffling and minibatch packing.
//!
//! Class labels are read from `class_no` by default. `class_no` and
//! `class_id` are interchangeable: when one is requested and missing, the
//! other is used.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use indexmap::IndexMap;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;

use crate::cache::value_to_json;
use crate::error::{Error, Result};
use crate::record::{FieldCell, Record};
use crate::stream::{Fields, Stream};
use crate::value::{Tensor, Value};

pub const DEFAULT_CLASS_FIELD: &str = "class_no";
pub const SPLIT_FIELD: &str = "split";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SplitLabel {
    Train,
    Valid,
    Test,
}

impl SplitLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitLabel::Train => "train",
            SplitLabel::Valid => "valid",
            SplitLabel::Test => "test",
        }
    }
}

impl fmt::Display for SplitLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SplitLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(SplitLabel::Train),
            "valid" => Ok(SplitLabel::Valid),
            "test" => Ok(SplitLabel::Test),
            other => Err(Error::UnknownSplitLabel(other.to_owned())),
        }
    }
}

impl From<SplitLabel> for Value {
    fn from(l: SplitLabel) -> Self {
        Value::from(l.as_str())
    }
}

/// Reads the class of `r`, falling back between `class_no` and `class_id`.
pub fn class_of(r: &Record, class_field: &str) -> Result<Value> {
    match r.get_field(class_field) {
        Err(Error::MissingField(missing)) if missing == class_field => {
            let alias = match class_field {
                "class_no" => "class_id",
                "class_id" => "class_no",
                _ => return Err(Error::MissingField(missing)),
            };
            if r.contains(alias) {
                r.get_field(alias)
            } else {
                Err(Error::MissingField(missing))
            }
        }
        other => other,
    }
}

/// Grouping key for values, which are not hashable themselves.
fn group_key(v: &Value) -> String {
    value_to_json(v).to_string()
}

fn key_text(v: Value) -> String {
    match v {
        Value::Text(s) => s,
        other => group_key(&other),
    }
}

/// Parameters for [`Stream::datasplit`].
///
/// Each record is assigned independently from a seeded generator consumed
/// in arrival order: `Test` with probability `test`, `Valid` with
/// probability `valid`, otherwise `Train`.
#[derive(Debug, Clone)]
pub struct DataSplit {
    valid: f64,
    test: f64,
    seed: u64,
    split_file: Option<PathBuf>,
    key_field: String,
}

impl DataSplit {
    /// Two-way train/test split.
    pub fn new(test: f64, seed: u64) -> Self {
        Self::three_way(0.0, test, seed)
    }

    pub fn three_way(valid: f64, test: f64, seed: u64) -> Self {
        DataSplit {
            valid,
            test,
            seed,
            split_file: None,
            key_field: "filename".into(),
        }
    }

    /// Loads assignments from `path` if it exists; otherwise computes them
    /// and writes them there as a JSON object `{key: label}`.
    pub fn with_split_file(mut self, path: impl Into<PathBuf>) -> Self {
        self.split_file = Some(path.into());
        self
    }

    pub fn with_key_field(mut self, key_field: impl Into<String>) -> Self {
        self.key_field = key_field.into();
        self
    }

    fn validate(&self) -> Result<()> {
        let ok = |x: f64| (0.0..=1.0).contains(&x);
        if !ok(self.valid) || !ok(self.test) || self.valid + self.test > 1.0 {
            return Err(Error::InvalidArgument(format!(
                "split fractions valid={} test={} must lie in [0,1] and sum to at most 1",
                self.valid, self.test
            )));
        }
        Ok(())
    }

    fn label(&self, u: f64) -> SplitLabel {
        if u < self.test {
            SplitLabel::Test
        } else if u < self.test + self.valid {
            SplitLabel::Valid
        } else {
            SplitLabel::Train
        }
    }
}

/// Reads a split file: a JSON object mapping keys to `"train"`, `"valid"`
/// or `"test"`.
pub fn read_split_file(path: impl AsRef<Path>) -> Result<HashMap<String, SplitLabel>> {
    let path = path.as_ref();
    let bad = |reason: String| Error::BadSplitFile {
        path: path.to_path_buf(),
        reason,
    };
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let doc: serde_json::Value = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
    let obj = doc.as_object().ok_or_else(|| bad("expected a JSON object".into()))?;
    obj.iter()
        .map(|(k, v)| {
            let label = v.as_str().ok_or_else(|| bad(format!("label for `{k}` is not a string")))?;
            let label = label.parse().map_err(|_| bad(format!("unknown label `{label}` for `{k}`")))?;
            Ok((k.clone(), label))
        })
        .collect()
}

/// Writes the `split` field of `records` as a split file keyed by
/// `key_field`, in the format [`DataSplit::with_split_file`] loads.
pub fn write_split_assignments(path: impl AsRef<Path>, records: &[Record], key_field: &str) -> Result<()> {
    let mut labels = BTreeMap::new();
    for r in records {
        let key = key_text(r.get_field(key_field)?);
        let label = match r.get_field(SPLIT_FIELD)? {
            Value::Text(s) => s.parse()?,
            other => return Err(Error::UnknownSplitLabel(other.to_string())),
        };
        labels.insert(key, label);
    }
    write_split_file(path.as_ref(), &labels)
}

fn write_split_file(path: &Path, labels: &BTreeMap<String, SplitLabel>) -> Result<()> {
    let obj: serde_json::Map<String, serde_json::Value> =
        labels.iter().map(|(k, l)| (k.clone(), l.as_str().into())).collect();
    let mut text = serde_json::to_string_pretty(&obj).expect("JSON values always serialize");
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Per-(class, split) record counts, rendered as a tab-separated table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SummaryTable {
    pub rows: Vec<(String, String, usize)>,
}

impl SummaryTable {
    pub const HEADER: &'static str = "class\tsplit\tcount";
}

impl fmt::Display for SummaryTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", Self::HEADER)?;
        for (class, split, count) in &self.rows {
            writeln!(f, "{class}\t{split}\t{count}")?;
        }
        Ok(())
    }
}

/// Counts records per class, and per split where records carry a `split`
/// field (`-` otherwise). Classes are shown by `class_name` when it exists
/// and the class field is `class_no`/`class_id`. Rows are sorted.
pub fn summarize(records: &[Record], class_field: &str) -> Result<SummaryTable> {
    let by_name = matches!(class_field, "class_no" | "class_id");
    let mut counts: BTreeMap<(String, String), usize> = BTreeMap::new();
    for r in records {
        let class = class_of(r, class_field)?;
        let class = if by_name && r.contains("class_name") {
            r.get_field("class_name")?
        } else {
            class
        };
        let split = if r.contains(SPLIT_FIELD) {
            r.get_field(SPLIT_FIELD)?.to_string()
        } else {
            "-".to_owned()
        };
        *counts.entry((class.to_string(), split)).or_default() += 1;
    }
    Ok(SummaryTable {
        rows: counts.into_iter().map(|((c, s), n)| (c, s, n)).collect(),
    })
}

/// Marks the first `m` members of each group in arrival order, `m` being
/// the size of the smallest group.
fn balanced_mask(keys: &[String]) -> Vec<bool> {
    let mut sizes: HashMap<&str, usize> = HashMap::new();
    for k in keys {
        *sizes.entry(k).or_default() += 1;
    }
    let min = sizes.values().copied().min().unwrap_or(0);
    let mut taken: HashMap<&str, usize> = HashMap::new();
    keys.iter()
        .map(|k| {
            let t = taken.entry(k).or_default();
            *t += 1;
            *t <= min
        })
        .collect()
}

fn keep_masked(records: Vec<Record>, mask: Vec<bool>) -> Vec<Record> {
    records.into_iter().zip(mask).filter(|(_, k)| *k).map(|(r, _)| r).collect()
}

/// A packed minibatch.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    /// Per feature field, records stacked along a new leading axis.
    pub features: IndexMap<String, Tensor>,
    /// Labels, shape `[size]`.
    pub labels: Tensor,
    pub size: usize,
}

impl Batch {
    pub fn feature(&self, name: &str) -> Option<&Tensor> {
        self.features.get(name)
    }
}

impl Stream<Record> {
    /// Adds a `split` field to every record.
    pub fn datasplit(self, split: DataSplit) -> Self {
        if let Err(e) = split.validate() {
            return Stream::failed(e);
        }
        Stream::deferred(move || {
            let mut rng = ChaCha8Rng::seed_from_u64(split.seed);
            match split.split_file.clone() {
                None => Ok(self.map_ok(move |mut r| {
                    let label = split.label(rng.gen());
                    r.set_field(SPLIT_FIELD, FieldCell::eager(label));
                    Ok(r)
                })),
                Some(path) if path.exists() => {
                    let labels = read_split_file(&path)?;
                    let key_field = split.key_field;
                    Ok(self.map_ok(move |mut r| {
                        let key = key_text(r.get_field(&key_field)?);
                        let label = *labels.get(&key).ok_or(Error::UnlistedKey(key))?;
                        r.set_field(SPLIT_FIELD, FieldCell::eager(label));
                        Ok(r)
                    }))
                }
                Some(path) => {
                    let mut records = self.as_list()?;
                    for r in &mut records {
                        r.set_field(SPLIT_FIELD, FieldCell::eager(split.label(rng.gen())));
                    }
                    write_split_assignments(&path, &records, &split.key_field)?;
                    Ok(Stream::from_records(records))
                }
            }
        })
    }

    /// Splits by regular expression over `key_field`: `Test` when
    /// `test_pattern` matches anywhere in the key, else `Valid` when
    /// `valid_pattern` matches, else `Train`.
    pub fn datasplit_by_pattern(self, test_pattern: &str, valid_pattern: Option<&str>, key_field: &str) -> Self {
        let compiled = Regex::new(test_pattern).and_then(|t| Ok((t, valid_pattern.map(Regex::new).transpose()?)));
        let (test, valid) = match compiled {
            Ok(p) => p,
            Err(e) => return Stream::failed(e.into()),
        };
        let key_field = key_field.to_owned();
        self.map_ok(move |mut r| {
            let key = key_text(r.get_field(&key_field)?);
            let label = if test.is_match(&key) {
                SplitLabel::Test
            } else if valid.as_ref().is_some_and(|v| v.is_match(&key)) {
                SplitLabel::Valid
            } else {
                SplitLabel::Train
            };
            r.set_field(SPLIT_FIELD, FieldCell::eager(label));
            Ok(r)
        })
    }

    /// Downsamples every class to the size of the smallest one, keeping the
    /// earliest records and their relative order.
    pub fn stratify_sample(self, class_field: &str) -> Self {
        let class_field = class_field.to_owned();
        Stream::deferred(move || {
            let records = self.as_list()?;
            let keys = records
                .iter()
                .map(|r| class_of(r, &class_field).map(|v| group_key(&v)))
                .collect::<Result<Vec<_>>>()?;
            let mask = balanced_mask(&keys);
            Ok(Stream::from_records(keep_masked(records, mask)))
        })
    }

    /// [`stratify_sample`](Stream::stratify_sample) applied separately
    /// within each split.
    pub fn stratify_sample_tt(self, class_field: &str, split_field: &str) -> Self {
        let (class_field, split_field) = (class_field.to_owned(), split_field.to_owned());
        Stream::deferred(move || {
            let records = self.as_list()?;
            let mut per_split: IndexMap<String, (Vec<usize>, Vec<String>)> = IndexMap::new();
            for (i, r) in records.iter().enumerate() {
                let split = group_key(&r.get_field(&split_field)?);
                let class = group_key(&class_of(r, &class_field)?);
                let entry = per_split.entry(split).or_default();
                entry.0.push(i);
                entry.1.push(class);
            }
            let mut keep = vec![false; records.len()];
            for (indices, classes) in per_split.values() {
                for (&i, kept) in indices.iter().zip(balanced_mask(classes)) {
                    keep[i] = kept;
                }
            }
            Ok(Stream::from_records(keep_masked(records, keep)))
        })
    }

    /// Prints the class summary to stdout and passes records through.
    pub fn summary(self, class_field: &str) -> Self {
        self.summary_to(class_field, std::io::stdout())
    }

    /// Materializes the stream, writes its [`SummaryTable`] to `sink`, then
    /// re-emits every record unchanged.
    pub fn summary_to<W>(self, class_field: &str, mut sink: W) -> Self
    where
        W: Write + Send + 'static,
    {
        let class_field = class_field.to_owned();
        Stream::deferred(move || {
            let records = self.as_list()?;
            let table = summarize(&records, &class_field)?;
            write!(sink, "{table}")
                .and_then(|_| sink.flush())
                .map_err(|e| Error::io("<summary>", e))?;
            Ok(Stream::from_records(records))
        })
    }

    /// Partitions into `(train, test)` by the split field, preserving order.
    /// Any label other than train or test is an error.
    pub fn make_train_test_split(self, split_field: &str) -> Result<(Vec<Record>, Vec<Record>)> {
        let mut train = Vec::new();
        let mut test = Vec::new();
        for r in self {
            let r = r?;
            match r.get_field(split_field)? {
                Value::Text(s) if s == "train" => train.push(r),
                Value::Text(s) if s == "test" => test.push(r),
                other => return Err(Error::UnknownSplitLabel(other.to_string())),
            }
        }
        Ok((train, test))
    }

    /// Endless stream of epochs, each a fresh seeded permutation of the
    /// (materialized) upstream.
    ///
    /// Records are re-emitted as clones sharing their cells, so `OnDemand`
    /// fields are recomputed on every emission while `LazyMemoized` ones
    /// are computed at most once.
    pub fn infshuffle(self, seed: u64) -> Self {
        Stream::deferred(move || {
            let records = self.as_list()?;
            if records.is_empty() {
                return Err(Error::EmptyStream);
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut order: Vec<usize> = (0..records.len()).collect();
            let mut pos = order.len();
            Ok(Stream::from_items(std::iter::from_fn(move || {
                if pos == order.len() {
                    order.shuffle(&mut rng);
                    pos = 0;
                }
                pos += 1;
                Some(records[order[pos - 1]].clone())
            })))
        })
    }

    /// Packs consecutive records into [`Batch`]es of `batch_size`; a final
    /// partial batch is emitted when upstream ends.
    ///
    /// Feature values must be tensors (or numbers, as rank-0 tensors) with
    /// a fixed shape per field. Labels must be numeric.
    pub fn as_batch(self, features: impl Into<Fields>, label_field: &str, batch_size: usize) -> Stream<Batch> {
        if batch_size == 0 {
            return Stream::failed(Error::InvalidArgument("batch_size must be positive".into()));
        }
        let features = features.into().names().to_vec();
        let label_field = label_field.to_owned();
        let mut shapes: Vec<Option<Vec<usize>>> = vec![None; features.len()];
        let mut upstream = self;
        Stream::from_results(std::iter::from_fn(move || {
            let mut columns: Vec<Vec<Tensor>> = vec![Vec::with_capacity(batch_size); features.len()];
            let mut labels = Vec::with_capacity(batch_size);
            while labels.len() < batch_size {
                let r = match upstream.next() {
                    None => break,
                    Some(Err(e)) => return Some(Err(e)),
                    Some(Ok(r)) => r,
                };
                let row = (|| {
                    for (i, name) in features.iter().enumerate() {
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
                        columns[i].push(t);
                    }
                    let label = class_of(&r, &label_field)?;
                    label.as_f64().map_err(|_| Error::NonNumericLabel {
                        field: label_field.clone(),
                    })
                })();
                match row {
                    Ok(l) => labels.push(l),
                    Err(e) => return Some(Err(e)),
                }
            }
            if labels.is_empty() {
                return None;
            }
            let size = labels.len();
            let features = features
                .iter()
                .zip(&columns)
                .map(|(name, col)| (name.clone(), Tensor::stack(col).expect("shapes checked per record")))
                .collect();
            Some(Ok(Batch {
                features,
                labels: Tensor::vector(labels),
                size,
            }))
        }))
    }
}
