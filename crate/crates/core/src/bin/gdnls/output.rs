use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use gdnls::{Error, Result};

use crate::config::Format;

pub const SCHEMA: &str = "v1";

/// Writes tables and documents into one run directory and remembers what it wrote.
pub struct Sink {
    dir: PathBuf,
    format: Format,
    pub files: Vec<String>,
}

impl Sink {
    pub fn new(dir: &Path, format: Format) -> Result<Sink> {
        fs::create_dir_all(dir)?;
        Ok(Sink { dir: dir.to_path_buf(), format, files: Vec::new() })
    }

    /// Rows as CSV (comment line, header, records) or as a JSON array.
    pub fn table<T: Serialize>(&mut self, name: &str, columns: &[&str], rows: &[T]) -> Result<()> {
        let (file, bytes) = match self.format {
            Format::Csv => {
                let mut buf = Vec::new();
                writeln!(buf, "# gdnls {} columns {SCHEMA}: {}", env!("CARGO_PKG_VERSION"), columns.join(","))?;
                {
                    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(&mut buf);
                    for r in rows {
                        w.serialize(r).map_err(|e| Error::Io(e.to_string()))?;
                    }
                    if rows.is_empty() {
                        w.write_record(columns).map_err(|e| Error::Io(e.to_string()))?;
                    }
                    w.flush()?;
                }
                (format!("{name}.csv"), buf)
            }
            Format::Json => (format!("{name}.json"), json_bytes(rows)?),
        };
        self.write(&file, &bytes)
    }

    pub fn document<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<()> {
        self.write(&format!("{name}.json"), &json_bytes(value)?)
    }

    fn write(&mut self, file: &str, bytes: &[u8]) -> Result<()> {
        fs::write(self.dir.join(file), bytes)?;
        self.files.push(file.to_string());
        Ok(())
    }
}

fn json_bytes<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    v.push(b'\n');
    Ok(v)
}

#[derive(Serialize)]
pub struct Manifest<'a, C: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub schema: &'static str,
    pub command: &'a str,
    pub config: &'a C,
    pub files: &'a [String],
    pub status: &'a str,
    pub notes: &'a [String],
}

pub fn version() -> &'static str {
    option_env!("GDNLS_GIT_DESCRIBE").unwrap_or(env!("CARGO_PKG_VERSION"))
}
