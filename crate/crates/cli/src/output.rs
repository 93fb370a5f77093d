//! Error type, exit codes and CSV emission shared by the commands.

use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use cbp_core::ErrorClass;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] cbp_core::Error),

    #[error("{0}")]
    Usage(String),

    #[error("config {path}: {source}")]
    Config {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn class(&self) -> ErrorClass {
        match self {
            CliError::Core(e) => e.class(),
            CliError::Usage(_) | CliError::Config { .. } => ErrorClass::Schema,
            CliError::File { .. } | CliError::Csv(_) | CliError::Io(_) => ErrorClass::Io,
        }
    }

    pub fn exit_code(&self) -> i32 {
        exit_code(self.class())
    }
}

pub fn exit_code(class: ErrorClass) -> i32 {
    match class {
        ErrorClass::Schema => 2,
        ErrorClass::Domain => 3,
        ErrorClass::Numerical => 4,
        ErrorClass::Io => 5,
    }
}

pub fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

pub fn open(path: &Path) -> CliResult<File> {
    File::open(path).map_err(|source| CliError::File {
        path: path.to_path_buf(),
        source,
    })
}

pub fn create(path: &Path) -> CliResult<File> {
    File::create(path).map_err(|source| CliError::File {
        path: path.to_path_buf(),
        source,
    })
}

/// Float formatting: shortest round-trip text, or fixed decimals.
#[derive(Debug, Clone, Copy, Default)]
pub struct Floats {
    pub decimals: Option<usize>,
}

impl Floats {
    pub fn fmt(self, x: f64) -> String {
        match self.decimals {
            Some(d) => format!("{x:.d$}"),
            None => format!("{x}"),
        }
    }

    pub fn opt(self, x: Option<f64>) -> String {
        x.map_or_else(String::new, |x| self.fmt(x))
    }
}

/// `key = value` lines echoed as `#` comments ahead of every CSV.
#[derive(Debug, Clone, Default)]
pub struct Meta(Vec<String>);

impl Meta {
    pub fn new(command: &str) -> Self {
        Meta(vec![format!("command = {command}")])
    }

    pub fn set(&mut self, key: &str, value: impl std::fmt::Display) -> &mut Self {
        self.0.push(format!("{key} = {value}"));
        self
    }

    pub fn set_list<T: std::fmt::Display>(&mut self, key: &str, values: &[T]) -> &mut Self {
        let joined: Vec<String> = values.iter().map(|v| v.to_string()).collect();
        self.set(key, joined.join(","))
    }

    pub fn lines(&self) -> &[String] {
        &self.0
    }
}

/// A CSV table with a metadata header.
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Table {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push<S: Into<String>>(&mut self, row: impl IntoIterator<Item = S>) {
        let row: Vec<String> = row.into_iter().map(Into::into).collect();
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write<W: Write>(&self, mut out: W, meta: &Meta) -> CliResult<()> {
        for line in meta.lines() {
            writeln!(out, "# {line}")?;
        }
        let mut csv = csv::Writer::from_writer(out);
        csv.write_record(&self.header)?;
        for row in &self.rows {
            csv.write_record(row)?;
        }
        csv.flush()?;
        Ok(())
    }

    pub fn to_path(&self, path: &Path, meta: &Meta) -> CliResult<()> {
        self.write(create(path)?, meta)
    }
}
