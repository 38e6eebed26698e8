//! `manifest.txt`: one `key = value` per line, in insertion order.
//!
//! Keys used by the runner:
//! `run.*` (command, version, seed, timestamps, status),
//! `config.*` (effective configuration echo),
//! `data.*` (dataset and split hashes, row counts, disjointness),
//! `file.<name>` (sha256 of each artifact) and `warning.<n>`.

use std::fmt::Write as _;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use mogan_core::dataio::{LabeledDataset, Split};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::CliError;

pub const MANIFEST_FILE: &str = "manifest.txt";

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifest {
    entries: Vec<(String, String)>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_sha256(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

pub fn dataset_sha256(ds: &LabeledDataset) -> String {
    sha256_hex(ds.to_csv_string().as_bytes())
}

/// Hash of a row-index set, bound to the dataset it indexes.
pub fn indices_sha256(dataset_hash: &str, indices: &[usize]) -> String {
    let mut h = Sha256::new();
    h.update(dataset_hash.as_bytes());
    for i in indices {
        h.update((*i as u64).to_le_bytes());
    }
    hex::encode(h.finalize())
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

impl Manifest {
    pub fn start(command: &str, cfg: Option<&ExperimentConfig>) -> Self {
        let mut m = Self::default();
        m.set("run.command", command);
        m.set("run.version", env!("CARGO_PKG_VERSION"));
        m.set("run.started", unix_now());
        if let Some(cfg) = cfg {
            m.set("run.seed", cfg.seed);
            for (k, v) in cfg.echo() {
                m.set(&format!("config.{k}"), v);
            }
        }
        m
    }

    /// Replaces an existing key in place or appends it.
    pub fn set(&mut self, key: &str, value: impl ToString) {
        let value = value.to_string();
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(e) => e.1 = value,
            None => self.entries.push((key.to_string(), value)),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn record_split(&mut self, ds: &LabeledDataset, split: &Split) {
        let dh = dataset_sha256(ds);
        self.set("data.dataset_sha256", &dh);
        self.set("data.train_sha256", indices_sha256(&dh, &split.train));
        self.set("data.test_sha256", indices_sha256(&dh, &split.test));
        self.set("data.train_rows", split.train.len());
        self.set("data.test_rows", split.test.len());
        self.set("data.disjoint", splits_disjoint(split));
    }

    pub fn record_file(&mut self, dir: &Path, name: &str) -> Result<(), CliError> {
        let sum = file_sha256(&dir.join(name))?;
        self.set(&format!("file.{name}"), sum);
        Ok(())
    }

    pub fn add_warning(&mut self, w: &str) {
        let n = self.entries.iter().filter(|(k, _)| k.starts_with("warning.")).count();
        self.set(&format!("warning.{n}"), w.replace('\n', " "));
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut m = Self::default();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once(" = ")
                .ok_or_else(|| CliError::Data(format!("manifest line {}: expected `key = value`", i + 1)))?;
            m.entries.push((k.to_string(), v.to_string()));
        }
        Ok(m)
    }

    /// Stamps the finish time and writes `manifest.txt` into `dir`.
    pub fn finish(&mut self, dir: &Path, status: &str) -> Result<(), CliError> {
        self.set("run.finished", unix_now());
        self.set("run.status", status);
        let path = dir.join(MANIFEST_FILE);
        std::fs::write(&path, self.to_text()).map_err(|e| CliError::io(&path, e))
    }

    pub fn read(dir: &Path) -> Result<Self, CliError> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        Self::parse(&text)
    }

    /// Checks every `file.*` entry against the file on disk.
    pub fn verify_files(&self, dir: &Path) -> Result<(), CliError> {
        for (k, v) in &self.entries {
            if let Some(name) = k.strip_prefix("file.") {
                let got = file_sha256(&dir.join(name))?;
                if &got != v {
                    return Err(CliError::Lineage(format!("{name} does not match its recorded checksum")));
                }
            }
        }
        Ok(())
    }
}

pub fn splits_disjoint(split: &Split) -> bool {
    // both lists are ascending
    let (mut i, mut j) = (0, 0);
    while i < split.train.len() && j < split.test.len() {
        match split.train[i].cmp(&split.test[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => return false,
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_overwrite() {
        let mut m = Manifest::default();
        m.set("a", 1);
        m.set("b.c", "x = y");
        m.set("a", 2);
        let back = Manifest::parse(&m.to_text()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.get("a"), Some("2"));
        assert_eq!(back.get("b.c"), Some("x = y"));
    }

    #[test]
    fn disjointness() {
        let s = Split {
            train: vec![0, 2, 4],
            test: vec![1, 3],
        };
        assert!(splits_disjoint(&s));
        let s = Split {
            train: vec![0, 2, 4],
            test: vec![1, 4],
        };
        assert!(!splits_disjoint(&s));
    }

    #[test]
    fn index_hash_depends_on_dataset() {
        assert_ne!(indices_sha256("a", &[1, 2]), indices_sha256("b", &[1, 2]));
        assert_ne!(indices_sha256("a", &[1, 2]), indices_sha256("a", &[1, 3]));
    }
}
