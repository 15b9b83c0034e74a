//! CSV and manifest writers.
//!
//! Every CSV file starts with a `#` comment line naming the preset and seed
//! that produced it, followed by the column header.

use std::fmt::Display;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};

use super::preset::PresetName;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Provenance {
    pub preset: PresetName,
    pub seed: u64,
}

impl Display for Provenance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "preset={} seed={}", self.preset, self.seed)
    }
}

pub struct CsvWriter {
    out: BufWriter<File>,
    path: PathBuf,
    n_columns: usize,
}

impl CsvWriter {
    pub fn create(path: &Path, provenance: Provenance, columns: &[&str]) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = CsvWriter {
            out: BufWriter::new(file),
            path: path.to_path_buf(),
            n_columns: columns.len(),
        };
        w.line(format_args!("# {provenance}"))?;
        w.line(format_args!("{}", columns.join(",")))?;
        Ok(w)
    }

    fn line(&mut self, args: std::fmt::Arguments<'_>) -> Result<()> {
        self.out
            .write_fmt(args)
            .and_then(|_| self.out.write_all(b"\n"))
            .map_err(|e| Error::io(&self.path, e))
    }

    pub fn row(&mut self, cells: &[&dyn Display]) -> Result<()> {
        debug_assert_eq!(cells.len(), self.n_columns, "row width in {}", self.path.display());
        for (i, c) in cells.iter().enumerate() {
            let sep = if i == 0 { "" } else { "," };
            write!(self.out, "{sep}{c}").map_err(|e| Error::io(&self.path, e))?;
        }
        self.out.write_all(b"\n").map_err(|e| Error::io(&self.path, e))
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush().map_err(|e| Error::io(&self.path, e))
    }
}

/// Write `value` as TOML.
pub fn write_toml<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = toml::to_string(value).map_err(|e| Error::Config(e.to_string()))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}
