//! Stream producers over the file system and text formats, and the matching
//! writers used by the CLI.
//!
//! All directory listings are sorted so that results are a deterministic
//! function of the directory contents.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use walkdir::WalkDir;

use crate::cache::{number_to_value, value_from_json, value_to_json};
use crate::error::{Error, Result};
use crate::record::Record;
use crate::stream::Stream;
use crate::value::Value;

/// Paths of the regular files below `dir`, recursively, as `Text` values
/// prefixed with `dir`.
///
/// Traversal is depth-first with siblings in name order, which is the same
/// as sorting the paths component-wise. `ext` filters by a
/// case-insensitive suffix such as `".jpg"`.
pub fn get_files(dir: impl AsRef<Path>, ext: Option<&str>) -> Stream<Value> {
    let dir = dir.as_ref().to_path_buf();
    let ext = ext.map(str::to_lowercase);
    let walk = WalkDir::new(&dir).sort_by_file_name().into_iter();
    Stream::from_results(walk.filter_map(move |entry| {
        let entry = match entry {
            Ok(e) => e,
            Err(e) => {
                let path = e.path().unwrap_or(&dir).to_path_buf();
                let io = e.into_io_error().unwrap_or_else(|| std::io::Error::other("directory walk failed"));
                return Some(Err(Error::io(path, io)));
            }
        };
        if !entry.file_type().is_file() {
            return None;
        }
        let path = entry.path().to_string_lossy().into_owned();
        match &ext {
            Some(ext) if !path.to_lowercase().ends_with(ext.as_str()) => None,
            _ => Some(Ok(Value::Text(path))),
        }
    }))
}

/// Immediate subdirectories of `dir`, in name order.
fn class_dirs(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        if path.is_dir() {
            out.push((entry.file_name().to_string_lossy().into_owned(), path));
        }
    }
    out.sort();
    Ok(out)
}

/// Labelled file stream for classification: one record
/// `{filename, class_name, class_no}` per file under each class
/// subdirectory of `data_dir`.
///
/// Without `classes`, subdirectories are numbered from 0 in name order.
/// With `classes`, the given numbering is used and any subdirectory missing
/// from it is an [`Error::UnknownClass`].
pub fn get_datastream(
    data_dir: impl AsRef<Path>,
    ext: Option<&str>,
    classes: Option<&BTreeMap<String, i64>>,
) -> Stream {
    let data_dir = data_dir.as_ref().to_path_buf();
    let ext = ext.map(str::to_owned);
    let classes = classes.cloned();
    Stream::deferred(move || {
        let dirs = class_dirs(&data_dir)?;
        let numbered: Vec<(String, i64, PathBuf)> = match classes {
            None => dirs.into_iter().enumerate().map(|(i, (name, p))| (name, i as i64, p)).collect(),
            Some(map) => dirs
                .into_iter()
                .map(|(name, p)| match map.get(&name) {
                    Some(&no) => Ok((name, no, p)),
                    None => Err(Error::UnknownClass(name)),
                })
                .collect::<Result<_>>()?,
        };
        let per_class = numbered.into_iter().map(move |(name, no, path)| {
            get_files(path, ext.as_deref()).map_ok(move |f| {
                Ok(Record::new()
                    .with("filename", f)
                    .with("class_name", name.clone())
                    .with("class_no", no))
            })
        });
        Ok(Stream::from_results(per_class.flatten()))
    })
}

/// Records from a CSV file whose first row names the fields. Every value is
/// `Text`; no type inference is attempted.
pub fn csvsource(path: impl AsRef<Path>) -> Stream {
    let path = path.as_ref().to_path_buf();
    Stream::deferred(move || {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(&path)
            .map_err(|e| csv_error(&path, e))?;
        let header: Vec<String> = reader
            .headers()
            .map_err(|e| csv_error(&path, e))?
            .iter()
            .map(str::to_owned)
            .collect();
        if header.is_empty() || header.iter().any(String::is_empty) {
            return Err(Error::Parse {
                path,
                line: 1,
                column: 1,
                message: "header row must name every column".into(),
            });
        }
        let rows = reader.into_records().map(move |row| {
            let row = row.map_err(|e| csv_error(&path, e))?;
            Ok(header.iter().zip(row.iter()).map(|(k, v)| (k.clone(), v)).collect::<Record>())
        });
        Ok(Stream::from_results(rows))
    })
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        csv::ErrorKind::UnequalLengths { pos, expected_len, len } => Error::RaggedRow {
            path: path.to_path_buf(),
            line: pos.map(|p| p.line()).unwrap_or(line),
            expected: expected_len as usize,
            found: len as usize,
        },
        other => Error::Parse {
            path: path.to_path_buf(),
            line: line as usize,
            column: 0,
            message: format!("{other:?}"),
        },
    }
}

/// Records from a JSON file holding either one top-level array of objects
/// or one object per line (JSON Lines). The format is chosen by the first
/// non-whitespace byte.
///
/// Nested objects become `Map` values.
pub fn jsonstream(path: impl AsRef<Path>) -> Stream {
    json_records(path.as_ref().to_path_buf(), plain_from_json)
}

/// Like [`jsonstream`], but decodes the tagged value encoding of
/// [`crate::cache`], so tensors written by [`write_jsonl`] come back as
/// tensors. This is the CLI interchange format.
pub fn jsonstream_tagged(path: impl AsRef<Path>) -> Stream {
    json_records(path.as_ref().to_path_buf(), value_from_json)
}

type Convert = fn(&serde_json::Value) -> std::result::Result<Value, String>;

fn plain_from_json(j: &serde_json::Value) -> std::result::Result<Value, String> {
    use serde_json::Value as J;
    Ok(match j {
        J::Null => Value::Null,
        J::Bool(b) => Value::Bool(*b),
        J::Number(n) => number_to_value(n),
        J::String(s) => Value::Text(s.clone()),
        J::Array(items) => Value::List(items.iter().map(plain_from_json).collect::<std::result::Result<_, _>>()?),
        J::Object(obj) => Value::Map(
            obj.iter()
                .map(|(k, v)| Ok((k.clone(), plain_from_json(v)?)))
                .collect::<std::result::Result<_, String>>()?,
        ),
    })
}

fn json_records(path: PathBuf, convert: Convert) -> Stream {
    Stream::deferred(move || {
        let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
        let mut reader = BufReader::new(file);
        // Skip leading whitespace without losing track of line numbers.
        let mut skipped_lines = 0;
        let first = loop {
            let buf = reader.fill_buf().map_err(|e| Error::io(&path, e))?;
            if buf.is_empty() {
                break None;
            }
            match buf.iter().position(|b| !b.is_ascii_whitespace()) {
                Some(i) => {
                    skipped_lines += buf[..i].iter().filter(|&&b| b == b'\n').count();
                    let first = buf[i];
                    reader.consume(i);
                    break Some(first);
                }
                None => {
                    let n = buf.len();
                    skipped_lines += buf.iter().filter(|&&b| b == b'\n').count();
                    reader.consume(n);
                }
            }
        };
        match first {
            None => Ok(Stream::empty()),
            Some(b'[') => json_array(path, reader, skipped_lines, convert),
            Some(_) => Ok(json_lines(path, reader, skipped_lines, convert)),
        }
    })
}

fn json_array(path: PathBuf, mut reader: BufReader<File>, line_offset: usize, convert: Convert) -> Result<Stream> {
    let mut text = String::new();
    reader.read_to_string(&mut text).map_err(|e| Error::io(&path, e))?;
    let doc: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.clone(),
        line: e.line() + line_offset,
        column: e.column(),
        message: e.to_string(),
    })?;
    let items = match doc {
        serde_json::Value::Array(items) => items,
        _ => unreachable!("document starts with `[`"),
    };
    Ok(Stream::from_results(
        items
            .into_iter()
            .enumerate()
            .map(move |(index, item)| object_to_record(&path, index, 0, &item, convert)),
    ))
}

fn json_lines(path: PathBuf, reader: BufReader<File>, line_offset: usize, convert: Convert) -> Stream {
    let mut index = 0;
    Stream::from_results(reader.lines().enumerate().filter_map(move |(i, line)| {
        let line_no = i + 1 + line_offset;
        let line = match line {
            Ok(l) => l,
            Err(e) => return Some(Err(Error::io(&path, e))),
        };
        if line.trim().is_empty() {
            return None;
        }
        let parsed = serde_json::from_str::<serde_json::Value>(&line).map_err(|e| Error::Parse {
            path: path.clone(),
            line: line_no,
            column: e.column(),
            message: e.to_string(),
        });
        let out = parsed.and_then(|item| object_to_record(&path, index, line_no, &item, convert));
        index += 1;
        Some(out)
    }))
}

fn object_to_record(path: &Path, index: usize, line: usize, item: &serde_json::Value, convert: Convert) -> Result<Record> {
    let obj = item.as_object().ok_or_else(|| Error::NotAnObject {
        path: path.to_path_buf(),
        index,
    })?;
    let parse_err = |message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        column: 0,
        message,
    };
    let mut r = Record::new();
    for (k, v) in obj {
        if k.is_empty() {
            return Err(parse_err("empty field name".into()));
        }
        r.set_value(k.clone(), convert(v).map_err(parse_err)?);
    }
    Ok(r)
}

/// Text written to a CSV cell: text as-is, null as empty, anything else in
/// its tagged JSON form.
pub fn csv_cell(v: &Value) -> String {
    match v {
        Value::Text(s) => s.clone(),
        Value::Null => String::new(),
        other => value_to_json(other).to_string(),
    }
}

/// Writes records as CSV with minimal quoting. The first record fixes the
/// header; later records must carry exactly the same fields. Returns the
/// number of rows written.
pub fn write_csv(path: impl AsRef<Path>, records: impl IntoIterator<Item = Result<Record>>) -> Result<usize> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::WriterBuilder::new().from_writer(BufWriter::new(file));
    let mut header: Option<Vec<String>> = None;
    let mut rows = 0;
    let werr = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::custom(format!("{}: {other:?}", path.display())),
    };
    for record in records {
        let record = record?;
        let names = header.get_or_insert_with(|| record.field_names().into_iter().map(str::to_owned).collect());
        if rows == 0 {
            w.write_record(names.iter()).map_err(werr)?;
        }
        if record.len() != names.len() {
            return Err(Error::RaggedRow {
                path: path.to_path_buf(),
                line: rows as u64 + 2,
                expected: names.len(),
                found: record.len(),
            });
        }
        let cells = names.iter().map(|n| record.get_field(n).map(|v| csv_cell(&v))).collect::<Result<Vec<_>>>()?;
        w.write_record(&cells).map_err(werr)?;
        rows += 1;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(rows)
}

/// One JSON object per line, fields in record order, values in the tagged
/// encoding. Returns the number of lines written.
pub fn write_jsonl(path: impl AsRef<Path>, records: impl IntoIterator<Item = Result<Record>>) -> Result<usize> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut n = 0;
    for record in records {
        let obj: serde_json::Map<String, serde_json::Value> = record?
            .forced()?
            .iter()
            .map(|(k, v)| (k.clone(), value_to_json(v)))
            .collect();
        serde_json::to_writer(&mut w, &obj).map_err(|e| Error::io(path, e.into()))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        n += 1;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(n)
}
