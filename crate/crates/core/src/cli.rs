//! Command-line front end over files. Every subcommand is a short
//! composition of library calls.
//!
//! Exit codes: `0` success, `1` usage error, `2` data error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::error::{Error, Result};
use crate::ml::{summarize, write_split_assignments, DataSplit, DEFAULT_CLASS_FIELD};
use crate::sources::{csvsource, get_datastream, jsonstream_tagged, write_csv, write_jsonl};
use crate::stream::Stream;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "mdstream", version, about = "Run multi-field stream pipelines over files")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Convert between CSV and JSON Lines, chosen by file extension.
    Convert {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print per-class counts for a directory of class subdirectories.
    Summary {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long)]
        ext: Option<String>,
    },
    /// Randomly assign files to train/test and write the split file.
    Split {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long)]
        test: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        ext: Option<String>,
    },
    /// Downsample every class to the size of the smallest.
    Stratify {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long = "class-field", default_value = DEFAULT_CLASS_FIELD)]
        class_field: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Keep lines whose 0-based index i has i mod n == k.
    Shard {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Stack fields over a sliding window of records.
    Window {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        fields: Vec<String>,
        #[arg(long)]
        size: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

enum Failure {
    Usage(String),
    Data(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(_) | Error::BadShard { .. } => Failure::Usage(e.to_string()),
            e => Failure::Data(e),
        }
    }
}

/// Runs the CLI with the process's stdout and stderr.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with_io(argv, &mut std::io::stdout(), &mut std::io::stderr())
}

pub fn run_with_io<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{e}");
                    EXIT_USAGE
                }
            };
        }
    };
    match execute(cli.command, out) {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "usage error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Data(e)) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_DATA
        }
    }
}

#[derive(Clone, Copy)]
enum Format {
    Csv,
    Jsonl,
}

fn format_of(path: &Path) -> std::result::Result<Format, Failure> {
    let ext = path.extension().and_then(|e| e.to_str()).map(str::to_lowercase);
    match ext.as_deref() {
        Some("csv") => Ok(Format::Csv),
        Some("jsonl") | Some("json") => Ok(Format::Jsonl),
        _ => Err(Failure::Usage(format!(
            "cannot infer format of {} (expected .csv, .jsonl or .json)",
            path.display()
        ))),
    }
}

fn read(path: &Path, format: Format) -> Stream {
    match format {
        Format::Csv => csvsource(path),
        Format::Jsonl => jsonstream_tagged(path),
    }
}

fn write(path: &Path, format: Format, records: Stream) -> Result<usize> {
    match format {
        Format::Csv => write_csv(path, records),
        Format::Jsonl => write_jsonl(path, records),
    }
}

fn execute(command: Command, out: &mut dyn Write) -> std::result::Result<(), Failure> {
    match command {
        Command::Convert { input, out: dest } => {
            let (from, to) = (format_of(&input)?, format_of(&dest)?);
            write(&dest, to, read(&input, from))?;
        }
        Command::Summary { dir, ext } => {
            let records = get_datastream(&dir, ext.as_deref(), None).as_list()?;
            let table = summarize(&records, DEFAULT_CLASS_FIELD)?;
            write!(out, "{table}").map_err(|e| Error::io("<stdout>", e))?;
        }
        Command::Split { dir, test, seed, out: dest, ext } => {
            let records = get_datastream(&dir, ext.as_deref(), None)
                .datasplit(DataSplit::new(test, seed))
                .as_list()?;
            write_split_assignments(&dest, &records, "filename")?;
        }
        Command::Stratify { input, class_field, out: dest } => {
            write_jsonl(&dest, jsonstream_tagged(&input).stratify_sample(&class_field))?;
        }
        Command::Shard { input, k, n, out: dest } => {
            if k >= n {
                return Err(Error::BadShard { k, n }.into());
            }
            write_jsonl(&dest, jsonstream_tagged(&input).shard(k, n))?;
        }
        Command::Window { input, fields, size, out: dest } => {
            if size == 0 {
                return Err(Failure::Usage("--size must be positive".into()));
            }
            write_jsonl(&dest, jsonstream_tagged(&input).sliding_window(fields, size))?;
        }
    }
    Ok(())
}
