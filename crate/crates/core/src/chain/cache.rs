//! Content-addressed cache for expensive chain stages.
//!
//! Keys fold in the backend fingerprint and stage parameters, so a cache
//! survives re-runs after a crash but invalidates when the serving
//! backend or budget changes. Values are small JSON files written via a
//! temp-file rename.

use std::path::PathBuf;

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Hex SHA-256 over length-prefixed parts, so part boundaries cannot
/// collide ("ab","c" vs "a","bc").
pub fn content_key(parts: &[&str]) -> String {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part.as_bytes());
    }
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub struct StageCache {
    dir: PathBuf,
}

impl StageCache {
    pub fn new(dir: impl Into<PathBuf>) -> std::io::Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(StageCache { dir })
    }

    pub fn dir(&self) -> &std::path::Path {
        &self.dir
    }

    fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    /// A hit requires the file to exist and parse; anything else is a
    /// miss, never an error.
    pub fn get<T: DeserializeOwned>(&self, key: &str) -> Option<T> {
        let bytes = std::fs::read(self.path_for(key)).ok()?;
        serde_json::from_slice(&bytes).ok()
    }

    pub fn put<T: Serialize>(&self, key: &str, value: &T) -> std::io::Result<()> {
        let bytes = serde_json::to_vec(value)?;
        let final_path = self.path_for(key);
        let tmp_path = self.dir.join(format!("{key}.tmp"));
        std::fs::write(&tmp_path, bytes)?;
        std::fs::rename(tmp_path, final_path)
    }
}
