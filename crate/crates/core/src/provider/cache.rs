//! Append-only response cache keyed by a content hash of the request.
//!
//! File layout: the 4-byte magic `PPC1`, then records. Each record is a
//! little-endian `u32` byte length followed by the record body:
//!
//! ```text
//! key[32] | request_ms: u64 | response_ms: u64 |
//! request_len: u32 | request body | response_len: u32 | response body
//! ```
//!
//! A truncated trailing record (for example after a crash mid-write) is
//! dropped on load and the file is cut back to its last whole record.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use sha2::{Digest, Sha256};

const MAGIC: &[u8; 4] = b"PPC1";

pub type CacheKey = [u8; 32];

pub fn hash_key(canonical_request: &[u8]) -> CacheKey {
    Sha256::digest(canonical_request).into()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CacheRecord {
    pub key: CacheKey,
    pub request_ms: u64,
    pub response_ms: u64,
    pub request_body: Vec<u8>,
    pub response_body: Vec<u8>,
}

impl CacheRecord {
    fn encode(&self) -> Vec<u8> {
        let body_len = 32 + 8 + 8 + 4 + self.request_body.len() + 4 + self.response_body.len();
        let mut out = Vec::with_capacity(4 + body_len);
        out.extend_from_slice(&(body_len as u32).to_le_bytes());
        out.extend_from_slice(&self.key);
        out.extend_from_slice(&self.request_ms.to_le_bytes());
        out.extend_from_slice(&self.response_ms.to_le_bytes());
        out.extend_from_slice(&(self.request_body.len() as u32).to_le_bytes());
        out.extend_from_slice(&self.request_body);
        out.extend_from_slice(&(self.response_body.len() as u32).to_le_bytes());
        out.extend_from_slice(&self.response_body);
        out
    }

    fn decode(body: &[u8]) -> Option<Self> {
        let mut cur = body;
        let mut take = |n: usize| -> Option<&[u8]> {
            if cur.len() < n {
                return None;
            }
            let (head, tail) = cur.split_at(n);
            cur = tail;
            Some(head)
        };
        let key: CacheKey = take(32)?.try_into().ok()?;
        let request_ms = u64::from_le_bytes(take(8)?.try_into().ok()?);
        let response_ms = u64::from_le_bytes(take(8)?.try_into().ok()?);
        let req_len = u32::from_le_bytes(take(4)?.try_into().ok()?) as usize;
        let request_body = take(req_len)?.to_vec();
        let resp_len = u32::from_le_bytes(take(4)?.try_into().ok()?) as usize;
        let response_body = take(resp_len)?.to_vec();
        Some(Self {
            key,
            request_ms,
            response_ms,
            request_body,
            response_body,
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CacheError {
    #[error("cache file {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0} is not a response cache file")]
    BadMagic(PathBuf),
}

/// In-memory index over an optional backing file. The first record stored
/// for a key wins; later puts for the same key are ignored.
#[derive(Debug, Default)]
pub struct ResponseCache {
    path: Option<PathBuf>,
    entries: Mutex<HashMap<CacheKey, CacheRecord>>,
    file: Mutex<Option<File>>,
}

impl ResponseCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens (creating if needed) a cache file and loads its records.
    pub fn open(path: &Path) -> Result<Self, CacheError> {
        let io = |source| CacheError::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut entries = HashMap::new();
        let mut valid_len = None;
        if path.exists() {
            let mut bytes = Vec::new();
            File::open(path)
                .and_then(|mut f| f.read_to_end(&mut bytes))
                .map_err(io)?;
            if !bytes.is_empty() {
                if bytes.len() < 4 || &bytes[..4] != MAGIC {
                    return Err(CacheError::BadMagic(path.to_path_buf()));
                }
                let (records, consumed) = decode_records(&bytes[4..]);
                for record in records {
                    entries.entry(record.key).or_insert(record);
                }
                if 4 + consumed < bytes.len() {
                    valid_len = Some((4 + consumed) as u64);
                }
            }
        }
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(io)?;
        if let Some(len) = valid_len {
            file.set_len(len).map_err(io)?;
        }
        if file.metadata().map_err(io)?.len() == 0 {
            file.write_all(MAGIC)
                .and_then(|_| file.flush())
                .map_err(io)?;
        }
        Ok(Self {
            path: Some(path.to_path_buf()),
            entries: Mutex::new(entries),
            file: Mutex::new(Some(file)),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn len(&self) -> usize {
        self.entries.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, key: &CacheKey) -> Option<CacheRecord> {
        self.entries.lock().unwrap().get(key).cloned()
    }

    /// Stores and flushes a record; returns false if the key was already present.
    pub fn put(&self, record: CacheRecord) -> Result<bool, CacheError> {
        let mut entries = self.entries.lock().unwrap();
        if entries.contains_key(&record.key) {
            return Ok(false);
        }
        if let Some(file) = self.file.lock().unwrap().as_mut() {
            let path = self.path.clone().unwrap_or_default();
            file.write_all(&record.encode())
                .and_then(|_| file.flush())
                .map_err(|source| CacheError::Io { path, source })?;
        }
        entries.insert(record.key, record);
        Ok(true)
    }
}

/// Whole records at the front of `bytes`, and how many bytes they span.
fn decode_records(bytes: &[u8]) -> (Vec<CacheRecord>, usize) {
    let total = bytes.len();
    let mut bytes = bytes;
    let mut out = Vec::new();
    while bytes.len() >= 4 {
        let len = u32::from_le_bytes(bytes[..4].try_into().unwrap()) as usize;
        let Some(body) = bytes.get(4..4 + len) else {
            break;
        };
        match CacheRecord::decode(body) {
            Some(r) => out.push(r),
            None => break,
        }
        bytes = &bytes[4 + len..];
    }
    (out, total - bytes.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(tag: u8) -> CacheRecord {
        CacheRecord {
            key: hash_key(&[tag]),
            request_ms: 10,
            response_ms: 25,
            request_body: vec![tag; 5],
            response_body: b"{\"ok\":true}".to_vec(),
        }
    }

    #[test]
    fn persists_and_reloads() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.bin");
        {
            let cache = ResponseCache::open(&path).unwrap();
            assert!(cache.put(record(1)).unwrap());
            assert!(cache.put(record(2)).unwrap());
            assert!(!cache.put(record(1)).unwrap());
        }
        let cache = ResponseCache::open(&path).unwrap();
        assert_eq!(cache.len(), 2);
        assert_eq!(cache.get(&record(2).key), Some(record(2)));
    }

    #[test]
    fn truncated_tail_is_ignored() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.bin");
        {
            let cache = ResponseCache::open(&path).unwrap();
            cache.put(record(1)).unwrap();
        }
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.extend_from_slice(&record(2).encode()[..20]);
        std::fs::write(&path, bytes).unwrap();
        let cache = ResponseCache::open(&path).unwrap();
        assert_eq!(cache.len(), 1);
        cache.put(record(3)).unwrap();
        drop(cache);
        let cache = ResponseCache::open(&path).unwrap();
        assert_eq!(cache.len(), 2);
        assert!(cache.get(&record(3).key).is_some());
    }

    #[test]
    fn rejects_foreign_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.bin");
        std::fs::write(&path, b"hello world").unwrap();
        assert!(matches!(
            ResponseCache::open(&path),
            Err(CacheError::BadMagic(_))
        ));
    }
}
