//! Provenance headers and file writing.

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::{CliError, RunConfig};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// First line of every CSV output.
pub fn provenance_line(command: &str, cfg: &RunConfig) -> String {
    format!(
        "# vstoxx {TOOL_VERSION} {command} seed={} config={}\n",
        cfg.seed,
        cfg.hash()
    )
}

/// Provenance fields embedded in JSON outputs.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct Provenance {
    pub tool_version: String,
    pub command: String,
    pub seed: u64,
    pub config_hash: String,
}

impl Provenance {
    pub fn new(command: &str, cfg: &RunConfig) -> Self {
        Self {
            tool_version: TOOL_VERSION.into(),
            command: command.into(),
            seed: cfg.seed,
            config_hash: cfg.hash(),
        }
    }
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

pub fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| io_error(path, e))
}

/// Header line followed by serialized rows.
pub fn write_serialized<T: Serialize>(path: &Path, header: &str, rows: &[T]) -> Result<(), CliError> {
    let mut buf = header.as_bytes().to_vec();
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    vstoxx_core::features::write_csv(rows, &mut buf, &name)?;
    write_bytes(path, &buf)
}

/// Header line, column names, then string records.
pub fn write_records(
    path: &Path,
    header: &str,
    columns: &[String],
    rows: &[Vec<String>],
) -> Result<(), CliError> {
    let mut buf = header.as_bytes().to_vec();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(columns).map_err(|e| io_error(path, e))?;
        for r in rows {
            w.write_record(r).map_err(|e| io_error(path, e))?;
        }
        w.flush().map_err(|e| io_error(path, e))?;
    }
    write_bytes(path, &buf)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| io_error(path, e))?;
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| io_error(path, e))
}
