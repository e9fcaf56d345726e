//! Output artifacts: a summary JSON embedding the resolved configuration,
//! per-replica CSV files, and an index-keyed record store that lets an
//! interrupted run resume from the replicas already on disk.

use crate::config::ResolvedConfig;
use serde::Serialize;
use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Serialize)]
struct SummaryDoc<'a, T: Serialize> {
    subcommand: &'a str,
    config: &'a ResolvedConfig,
    result: T,
}

pub fn write_summary<T: Serialize>(
    dir: &Path,
    subcommand: &str,
    config: &ResolvedConfig,
    result: T,
) -> std::io::Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join("summary.json");
    let doc = SummaryDoc {
        subcommand,
        config,
        result,
    };
    let mut file = fs::File::create(&path)?;
    serde_json::to_writer_pretty(&mut file, &doc)?;
    file.write_all(b"\n")?;
    Ok(path)
}

pub fn write_csv(dir: &Path, name: &str, header: &str, rows: &[String]) -> std::io::Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let mut file = fs::File::create(&path)?;
    writeln!(file, "{header}")?;
    for row in rows {
        writeln!(file, "{row}")?;
    }
    Ok(path)
}

/// Replica records on disk, keyed by replica index. A run whose fingerprint
/// matches can pick up the rows it already has and compute only the missing
/// indices; merged output is identical to a fresh run.
pub struct RecordStore {
    path: PathBuf,
    meta_path: PathBuf,
    header: String,
    fingerprint: u64,
    rows: BTreeMap<u64, String>,
}

#[derive(Serialize, serde::Deserialize)]
struct StoreMeta {
    fingerprint: u64,
}

impl RecordStore {
    pub fn open(dir: &Path, name: &str, header: &str, fingerprint: u64) -> std::io::Result<Self> {
        fs::create_dir_all(dir)?;
        let path = dir.join(name);
        let meta_path = dir.join(format!("{name}.meta.json"));
        let mut rows = BTreeMap::new();
        let meta_ok = fs::read_to_string(&meta_path)
            .ok()
            .and_then(|text| serde_json::from_str::<StoreMeta>(&text).ok())
            .map(|m| m.fingerprint == fingerprint)
            .unwrap_or(false);
        if meta_ok {
            if let Ok(text) = fs::read_to_string(&path) {
                for line in text.lines().skip(1) {
                    if let Some((idx, _)) = line.split_once(',') {
                        if let Ok(i) = idx.parse::<u64>() {
                            rows.insert(i, line.to_string());
                        }
                    }
                }
            }
        }
        Ok(Self {
            path,
            meta_path,
            header: header.to_string(),
            fingerprint,
            rows,
        })
    }

    pub fn missing(&self, replicas: u64) -> Vec<u64> {
        (0..replicas).filter(|r| !self.rows.contains_key(r)).collect()
    }

    pub fn insert(&mut self, replica: u64, row: String) {
        self.rows.insert(replica, row);
    }

    pub fn row(&self, replica: u64) -> Option<&str> {
        self.rows.get(&replica).map(|s| s.as_str())
    }

    /// Persist all rows (sorted by replica index) and the fingerprint.
    pub fn flush(&self) -> std::io::Result<()> {
        let mut file = fs::File::create(&self.path)?;
        writeln!(file, "{}", self.header)?;
        for row in self.rows.values() {
            writeln!(file, "{row}")?;
        }
        let meta = serde_json::to_string_pretty(&StoreMeta {
            fingerprint: self.fingerprint,
        })?;
        fs::write(&self.meta_path, meta + "\n")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn store_resumes_only_missing_indices() {
        let dir = std::env::temp_dir().join(format!("cpwalk-store-{}", std::process::id()));
        let _ = fs::remove_dir_all(&dir);
        let mut store = RecordStore::open(&dir, "r.csv", "replica,x", 42).unwrap();
        assert_eq!(store.missing(3), vec![0, 1, 2]);
        store.insert(1, "1,10".into());
        store.flush().unwrap();
        let store2 = RecordStore::open(&dir, "r.csv", "replica,x", 42).unwrap();
        assert_eq!(store2.missing(3), vec![0, 2]);
        // a different fingerprint invalidates the cache
        let store3 = RecordStore::open(&dir, "r.csv", "replica,x", 43).unwrap();
        assert_eq!(store3.missing(3), vec![0, 1, 2]);
        let _ = fs::remove_dir_all(&dir);
    }
}
