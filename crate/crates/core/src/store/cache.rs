use std::fs;
use std::io::{ErrorKind, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classifier::Exchange;

use super::StoreError;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TranscriptKey {
    pub arxiv_id: String,
    pub protocol_hash: String,
    pub model_id: String,
}

impl TranscriptKey {
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for part in [&self.arxiv_id, &self.protocol_hash, &self.model_id] {
            h.update(part.as_bytes());
            h.update([0x1f]);
        }
        hex::encode(h.finalize())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptCacheEntry {
    pub key: TranscriptKey,
    pub exchanges: Vec<Exchange>,
    pub created_at: DateTime<Utc>,
}

/// Content-addressed transcripts, one immutable JSON file per key.
#[derive(Debug, Clone)]
pub struct TranscriptCache {
    dir: PathBuf,
}

impl TranscriptCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        TranscriptCache { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, key: &TranscriptKey) -> PathBuf {
        self.dir.join(format!("{}.json", key.digest()))
    }

    pub fn lookup(&self, key: &TranscriptKey) -> Result<Option<TranscriptCacheEntry>, StoreError> {
        let path = self.path(key);
        let text = match fs::read_to_string(&path) {
            Ok(text) => text,
            Err(e) if e.kind() == ErrorKind::NotFound => return Ok(None),
            Err(source) => return Err(StoreError::Io { path, source }),
        };
        let entry: TranscriptCacheEntry =
            serde_json::from_str(&text).map_err(|e| StoreError::Corrupt {
                path: path.clone(),
                line: e.line(),
                message: e.to_string(),
            })?;
        Ok((entry.key == *key).then_some(entry))
    }

    /// Writes a new entry. Existing entries are never replaced: the file is
    /// fully written under a temporary name and then hard-linked into place,
    /// which fails if another writer got there first.
    pub fn put(&self, key: &TranscriptKey, exchanges: &[Exchange]) -> Result<(), StoreError> {
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| StoreError::Io { path, source }
        };
        fs::create_dir_all(&self.dir).map_err(io(&self.dir))?;
        let entry = TranscriptCacheEntry {
            key: key.clone(),
            exchanges: exchanges.to_vec(),
            created_at: Utc::now(),
        };
        let body = serde_json::to_vec_pretty(&entry).expect("entry serializes");
        let path = self.path(key);
        let tmp = self.dir.join(format!(
            ".{}.{}.{}.tmp",
            key.digest(),
            std::process::id(),
            rand::random::<u32>()
        ));
        {
            let mut file = fs::File::create_new(&tmp).map_err(io(&tmp))?;
            file.write_all(&body).map_err(io(&tmp))?;
            file.sync_all().map_err(io(&tmp))?;
        }
        let linked = fs::hard_link(&tmp, &path);
        let _ = fs::remove_file(&tmp);
        match linked {
            Ok(()) => Ok(()),
            Err(e) if e.kind() == ErrorKind::AlreadyExists => {
                Err(StoreError::DuplicateEntry(key.arxiv_id.clone()))
            }
            Err(source) => Err(StoreError::Io { path, source }),
        }
    }
}
