//! Disk cache of match results.
//!
//! An entry is the full engine output for one (variant ruleset, traffic,
//! engine config) triple, keyed by a content hash over all three. Entries are
//! plain JSON files; writes go through a per-process unique temp file and a
//! rename, so concurrent writers at worst waste work.

use std::collections::BTreeSet;
use std::net::Ipv4Addr;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::engine::{AlertRecord, DroppedRule, EngineConfig, RunOutput};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub flagged: BTreeSet<Ipv4Addr>,
    pub alerts: Vec<AlertRecord>,
    pub dropped: Vec<DroppedRule>,
}

impl From<RunOutput> for CacheEntry {
    fn from(out: RunOutput) -> CacheEntry {
        CacheEntry {
            flagged: out.flagged,
            alerts: out.alerts,
            dropped: out.dropped,
        }
    }
}

static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);

#[derive(Debug)]
pub struct DiskCache {
    dir: PathBuf,
    hits: AtomicU64,
    misses: AtomicU64,
}

impl DiskCache {
    pub fn open(dir: &Path) -> std::io::Result<DiskCache> {
        std::fs::create_dir_all(dir)?;
        Ok(DiskCache {
            dir: dir.to_path_buf(),
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Content hash binding a result to exactly its inputs: the serialized
    /// variant ruleset, the traffic file hash, and the engine config.
    pub fn key(ruleset_text: &str, traffic_sha256: &str, engine: &EngineConfig) -> String {
        let mut h = Sha256::new();
        h.update(ruleset_text.as_bytes());
        h.update([0]);
        h.update(traffic_sha256.as_bytes());
        h.update([0]);
        h.update(serde_json::to_string(engine).expect("engine config serializes").as_bytes());
        hex::encode(h.finalize())
    }

    fn entry_path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    /// A malformed or unreadable entry is treated as a miss.
    pub fn get(&self, key: &str) -> Option<CacheEntry> {
        let loaded = std::fs::read(self.entry_path(key))
            .ok()
            .and_then(|bytes| serde_json::from_slice(&bytes).ok());
        match loaded {
            Some(e) => {
                self.hits.fetch_add(1, Ordering::Relaxed);
                Some(e)
            }
            None => {
                self.misses.fetch_add(1, Ordering::Relaxed);
                None
            }
        }
    }

    pub fn put(&self, key: &str, entry: &CacheEntry) -> std::io::Result<()> {
        let tmp = self.dir.join(format!(
            ".tmp-{}-{}",
            std::process::id(),
            TMP_COUNTER.fetch_add(1, Ordering::Relaxed)
        ));
        let json = serde_json::to_string(entry).expect("cache entry serializes");
        std::fs::write(&tmp, json)?;
        std::fs::rename(&tmp, self.entry_path(key))
    }

    pub fn hits(&self) -> u64 {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn misses(&self) -> u64 {
        self.misses.load(Ordering::Relaxed)
    }
}
