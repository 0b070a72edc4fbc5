//! CSV tables with a `#`-prefixed JSON manifest as their first line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub parameters: Value,
    pub versions: Versions,
    pub timestamp: String,
    pub outputs: Vec<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub sdb: String,
    /// Solver, stability and integrator settings actually used.
    pub config: Value,
}

impl RunManifest {
    pub fn new(
        command: &str,
        parameters: &impl Serialize,
        config: Value,
        outputs: Vec<PathBuf>,
    ) -> Self {
        RunManifest {
            command: command.to_string(),
            parameters: serde_json::to_value(parameters).expect("arguments serialize"),
            versions: Versions {
                sdb: env!("CARGO_PKG_VERSION").to_string(),
                config,
            },
            timestamp: chrono::Utc::now().to_rfc3339(),
            outputs,
        }
    }
}

pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: Vec<String>) -> Self {
        Table {
            header,
            rows: Vec::new(),
        }
    }
}

pub fn write_table(path: &Path, manifest: &RunManifest, table: &Table) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Failed(format!("{}: {e}", path.display()));
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    let json = serde_json::to_string(manifest).map_err(|e| CliError::Failed(e.to_string()))?;
    writeln!(out, "# {json}").map_err(io)?;
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| CliError::Failed(format!("{}: {e}", path.display()));
    w.write_record(&table.header).map_err(csv_err)?;
    for row in &table.rows {
        w.write_record(row).map_err(csv_err)?;
    }
    w.flush().map_err(io)?;
    Ok(())
}

pub fn read_table(path: &Path) -> Result<(RunManifest, Table), CliError> {
    let io = |e: std::io::Error| CliError::Failed(format!("{}: {e}", path.display()));
    let mut reader = BufReader::new(File::open(path).map_err(io)?);
    let mut first = String::new();
    reader.read_line(&mut first).map_err(io)?;
    let json = first
        .strip_prefix('#')
        .ok_or_else(|| CliError::Failed(format!("{}: missing manifest line", path.display())))?;
    let manifest: RunManifest = serde_json::from_str(json.trim())
        .map_err(|e| CliError::Failed(format!("{}: bad manifest: {e}", path.display())))?;
    let mut r = csv::Reader::from_reader(reader);
    let csv_err = |e: csv::Error| CliError::Failed(format!("{}: {e}", path.display()));
    let header = r
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(String::from)
        .collect();
    let mut table = Table::new(header);
    for rec in r.records() {
        table
            .rows
            .push(rec.map_err(csv_err)?.iter().map(String::from).collect());
    }
    Ok((manifest, table))
}

/// `prefix_suffix.csv`, dropping a trailing `.csv` from the prefix.
pub fn derived_path(prefix: &Path, suffix: &str) -> PathBuf {
    let s = prefix.to_string_lossy();
    let stem = s.strip_suffix(".csv").unwrap_or(&s);
    PathBuf::from(format!("{stem}_{suffix}.csv"))
}
