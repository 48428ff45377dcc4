//! In-process content-addressed model store.
//!
//! Stands in for decentralized storage: a URI is the SHA-256 digest of the
//! stored bytes, prefixed with a logical namespace so the live chain and the
//! archive chain keep separate instances. The store never deletes — archive
//! guarantees depend on every historical blob staying resolvable.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::io;
use std::path::Path;
use std::sync::RwLock;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StoreError {
    #[error("unknown uri: {0}")]
    UnknownUri(String),
    #[error("malformed uri: {0}")]
    MalformedUri(String),
}

/// Logical store instance a blob belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Namespace {
    Live,
    Archive,
}

impl Namespace {
    fn prefix(self) -> &'static str {
        match self {
            Namespace::Live => "live",
            Namespace::Archive => "archive",
        }
    }
}

/// Content address: `<namespace>/<sha256-hex>` of the stored bytes.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ContentUri(String);

impl ContentUri {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn namespace(&self) -> Result<Namespace, StoreError> {
        match self.0.split_once('/') {
            Some(("live", _)) => Ok(Namespace::Live),
            Some(("archive", _)) => Ok(Namespace::Archive),
            _ => Err(StoreError::MalformedUri(self.0.clone())),
        }
    }

    pub fn digest_hex(&self) -> &str {
        self.0.split_once('/').map(|(_, d)| d).unwrap_or(&self.0)
    }
}

impl std::fmt::Display for ContentUri {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Thread-safe content-addressed byte store.
#[derive(Debug, Default)]
pub struct ModelStore {
    blobs: RwLock<BTreeMap<String, Vec<u8>>>,
}

impl ModelStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Stores bytes and returns their content address. Idempotent: identical
    /// content in the same namespace maps to the identical URI.
    pub fn put(&self, ns: Namespace, bytes: &[u8]) -> ContentUri {
        let digest = hex(&Sha256::digest(bytes));
        let uri = format!("{}/{}", ns.prefix(), digest);
        self.blobs
            .write()
            .expect("store lock poisoned")
            .entry(uri.clone())
            .or_insert_with(|| bytes.to_vec());
        ContentUri(uri)
    }

    pub fn get(&self, uri: &ContentUri) -> Result<Vec<u8>, StoreError> {
        self.blobs
            .read()
            .expect("store lock poisoned")
            .get(uri.as_str())
            .cloned()
            .ok_or_else(|| StoreError::UnknownUri(uri.as_str().to_owned()))
    }

    pub fn contains(&self, uri: &ContentUri) -> bool {
        self.blobs
            .read()
            .expect("store lock poisoned")
            .contains_key(uri.as_str())
    }

    pub fn len(&self) -> usize {
        self.blobs.read().expect("store lock poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Writes one file per blob under `dir/<namespace>/<digest>`.
    pub fn persist(&self, dir: &Path) -> io::Result<()> {
        let blobs = self.blobs.read().expect("store lock poisoned");
        for (uri, bytes) in blobs.iter() {
            let path = dir.join(uri);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(path, bytes)?;
        }
        Ok(())
    }

    /// Reads a directory produced by [`ModelStore::persist`], verifying that
    /// each filename matches the digest of its content.
    pub fn load(dir: &Path) -> io::Result<Self> {
        let store = Self::new();
        for ns in [Namespace::Live, Namespace::Archive] {
            let sub = dir.join(ns.prefix());
            if !sub.is_dir() {
                continue;
            }
            for entry in std::fs::read_dir(&sub)? {
                let entry = entry?;
                let bytes = std::fs::read(entry.path())?;
                let expected = entry.file_name().to_string_lossy().into_owned();
                let actual = hex(&Sha256::digest(&bytes));
                if expected != actual {
                    return Err(io::Error::new(
                        io::ErrorKind::InvalidData,
                        format!("digest mismatch for {expected}"),
                    ));
                }
                store.put(ns, &bytes);
            }
        }
        Ok(store)
    }
}
