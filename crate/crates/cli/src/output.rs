//! CSV emission with a provenance comment line.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use wfl_core::{Error, Result};

pub struct Output {
    pub dir: PathBuf,
    provenance: String,
}

pub type Table = csv::Writer<File>;

fn io(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Config(format!("{}: {e}", path.display()))
}

impl Output {
    pub fn new(dir: PathBuf, hash: &str, seed: u64) -> Result<Self> {
        std::fs::create_dir_all(&dir).map_err(|e| io(&dir, e))?;
        let provenance = format!("# wfl {} config={hash} seed={seed}", env!("CARGO_PKG_VERSION"));
        Ok(Self { dir, provenance })
    }

    /// Opens `name` and writes the provenance line and `header`.
    pub fn table(&self, name: &str, header: &[&str]) -> Result<Table> {
        let path = self.dir.join(name);
        let mut file = File::create(&path).map_err(|e| io(&path, e))?;
        writeln!(file, "{}", self.provenance).map_err(|e| io(&path, e))?;
        let mut w = csv::Writer::from_writer(file);
        w.write_record(header).map_err(|e| io(&path, e))?;
        Ok(w)
    }
}

/// Writes one row of displayable fields.
pub fn row(w: &mut Table, fields: &[&dyn std::fmt::Display]) -> Result<()> {
    w.write_record(fields.iter().map(|f| f.to_string())).map_err(|e| Error::Config(format!("csv: {e}")))
}

pub fn close(mut w: Table) -> Result<()> {
    w.flush().map_err(|e| Error::Config(format!("csv: {e}")))
}
