use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::RunConfig;
use crate::error::{Result, VortexError};

/// One CSV file: a header row and string-formatted records.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub file: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(file: &str, header: &[&str]) -> Self {
        Self { file: file.to_string(), header: header.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    /// Appends a record of numbers, each with 17 significant digits.
    pub fn push(&mut self, values: &[f64]) {
        self.rows.push(values.iter().map(|&x| fmt_float(x)).collect());
    }

    /// Appends a record whose first cell is a label.
    pub fn push_labeled(&mut self, label: &str, values: &[f64]) {
        let mut row = vec![label.to_string()];
        row.extend(values.iter().map(|&x| fmt_float(x)));
        self.rows.push(row);
    }

    fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| VortexError::Io(std::io::Error::other(e));
        w.write_record(&self.header).map_err(io)?;
        for row in &self.rows {
            if row.len() != self.header.len() {
                return Err(VortexError::SizeMismatch { left: row.len(), right: self.header.len() });
            }
            w.write_record(row).map_err(io)?;
        }
        w.into_inner().map_err(|e| VortexError::Io(std::io::Error::other(e.to_string())))
    }
}

/// Scientific notation with 17 significant digits, so every `f64` round-trips.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub file: String,
    pub sha256: String,
}

/// Provenance of a completed run. Field order is the serialized key order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: RunConfig,
    pub seed: u64,
    pub version: String,
    pub duration_s: f64,
    pub outputs: Vec<OutputRecord>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes every table and then the manifest into `dir`, creating it if
/// needed. If any write fails, the files already written by this call are
/// removed before the error is returned.
pub fn write_outputs(
    tables: &[Table],
    dir: &Path,
    command: &str,
    config: &RunConfig,
    duration_s: f64,
) -> Result<RunManifest> {
    let mut written: Vec<PathBuf> = Vec::new();
    let result = write_all(tables, dir, command, config, duration_s, &mut written);
    if result.is_err() {
        for path in &written {
            let _ = fs::remove_file(path);
        }
    }
    result
}

fn write_all(
    tables: &[Table],
    dir: &Path,
    command: &str,
    config: &RunConfig,
    duration_s: f64,
    written: &mut Vec<PathBuf>,
) -> Result<RunManifest> {
    fs::create_dir_all(dir)?;
    let mut outputs = Vec::with_capacity(tables.len());
    for table in tables {
        let bytes = table.to_bytes()?;
        let path = dir.join(&table.file);
        fs::write(&path, &bytes)?;
        written.push(path);
        outputs.push(OutputRecord { file: table.file.clone(), sha256: sha256_hex(&bytes) });
    }
    let manifest = RunManifest {
        command: command.to_string(),
        config: config.clone(),
        seed: config.seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        duration_s,
        outputs,
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| VortexError::Io(std::io::Error::other(e)))?;
    let path = dir.join(MANIFEST_FILE);
    fs::write(&path, json + "\n")?;
    written.push(path);
    Ok(manifest)
}

/// Reads a manifest written by [`write_outputs`].
pub fn read_manifest(path: &Path) -> Result<RunManifest> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| VortexError::Io(std::io::Error::other(e)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config() -> RunConfig {
        RunConfig::parse("nu = 1\nn = 2\na = 1, 1\n").unwrap()
    }

    #[test]
    fn floats_keep_seventeen_digits() {
        assert_eq!(fmt_float(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_float(0.1).parse::<f64>().unwrap(), 0.1);
        assert_eq!(fmt_float(-2.0), "-2.0000000000000000e0");
    }

    #[test]
    fn empty_table_gives_header_only_csv_and_valid_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let table = Table::new("empty.csv", &["t", "value"]);
        let m = write_outputs(&[table], dir.path(), "pairlog", &config(), 0.5).unwrap();
        assert_eq!(fs::read_to_string(dir.path().join("empty.csv")).unwrap(), "t,value\n");
        assert_eq!(read_manifest(&dir.path().join(MANIFEST_FILE)).unwrap(), m);
    }

    #[test]
    fn manifest_keys_are_in_stable_order() {
        let dir = tempfile::tempdir().unwrap();
        let mut table = Table::new("x.csv", &["t"]);
        table.push(&[1.0]);
        write_outputs(&[table], dir.path(), "pairlog", &config(), 0.0).unwrap();
        let text = fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap();
        let pos: Vec<usize> = ["\"command\"", "\"config\"", "\"seed\"", "\"version\"", "\"duration_s\"", "\"outputs\""]
            .iter()
            .map(|k| text.find(k).unwrap())
            .collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]), "{text}");
        assert!(text.contains(&sha256_hex(b"t\n1.0000000000000000e0\n")));
    }

    #[test]
    fn failed_write_removes_partial_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let mut good = Table::new("good.csv", &["t"]);
        good.push(&[1.0]);
        let mut bad = Table::new("bad.csv", &["t", "u"]);
        bad.push(&[1.0]);
        assert!(write_outputs(&[good, bad], dir.path(), "pairlog", &config(), 0.0).is_err());
        assert!(fs::read_dir(dir.path()).unwrap().next().is_none());
    }

    #[test]
    fn sha256_matches_known_digest() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
