//! JSON Lines cassette of recorded model responses, keyed by fixture key.

use std::collections::HashMap;
use std::fs::{self, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CassetteEntry {
    pub fixture_key: String,
    pub raw: String,
}

#[derive(Debug, Default)]
pub struct Cassette {
    path: Option<PathBuf>,
    entries: HashMap<String, String>,
}

impl Cassette {
    /// In-memory cassette, never written to disk.
    pub fn in_memory() -> Self {
        Cassette::default()
    }

    /// Loads `path`; a missing file is an empty cassette. Later lines win
    /// over earlier ones with the same key.
    pub fn open(path: impl AsRef<Path>) -> std::io::Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut entries = HashMap::new();
        if path.exists() {
            let reader = BufReader::new(fs::File::open(&path)?);
            for (n, line) in reader.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let entry: CassetteEntry = serde_json::from_str(&line).map_err(|e| {
                    std::io::Error::new(
                        std::io::ErrorKind::InvalidData,
                        format!("{}:{}: {e}", path.display(), n + 1),
                    )
                })?;
                entries.insert(entry.fixture_key, entry.raw);
            }
        }
        Ok(Cassette {
            path: Some(path),
            entries,
        })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn insert(&mut self, key: &str, raw: &str) -> std::io::Result<()> {
        if let Some(path) = &self.path {
            let line = serde_json::to_string(&CassetteEntry {
                fixture_key: key.to_string(),
                raw: raw.to_string(),
            })?;
            let mut file = OpenOptions::new().create(true).append(true).open(path)?;
            writeln!(file, "{line}")?;
        }
        self.entries.insert(key.to_string(), raw.to_string());
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn appends_and_reloads() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        let mut c = Cassette::open(&path).unwrap();
        assert!(c.is_empty());
        c.insert("k1", "first").unwrap();
        c.insert("k2", "line\nbreak").unwrap();
        c.insert("k1", "newer").unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 3);
        let reloaded = Cassette::open(&path).unwrap();
        assert_eq!(reloaded.len(), 2);
        assert_eq!(reloaded.get("k1"), Some("newer"));
        assert_eq!(reloaded.get("k2"), Some("line\nbreak"));
    }
}
