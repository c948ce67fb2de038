//! Record resolution by CID.

use std::collections::HashMap;
use std::sync::RwLock;

use crate::cid::Cid;
use crate::error::{Result, TwineError};

/// Fetches stored canonical bytes by CID.
///
/// `Ok(None)` means the record is genuinely absent; `Err` is reserved for
/// infrastructure failures. Implementations must tolerate concurrent reads.
pub trait Resolver: Sync {
    fn fetch(&self, cid: &Cid) -> Result<Option<Vec<u8>>>;

    /// Fetch bytes that must exist, mapping absence to `ResolverMiss`.
    fn fetch_required(&self, cid: &Cid) -> Result<Vec<u8>> {
        self.fetch(cid)?
            .ok_or_else(|| TwineError::ResolverMiss(cid.to_text()))
    }
}

/// In-memory resolver keyed by CID; used by tests and by builders that have
/// not yet persisted anything.
#[derive(Default)]
pub struct MemoryResolver {
    records: RwLock<HashMap<Cid, Vec<u8>>>,
}

impl MemoryResolver {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&self, cid: Cid, bytes: Vec<u8>) {
        self.records.write().unwrap().insert(cid, bytes);
    }

    pub fn remove(&self, cid: &Cid) {
        self.records.write().unwrap().remove(cid);
    }

    /// Replace the bytes stored under an existing key, keeping the key.
    /// Only useful for constructing tamper fixtures.
    pub fn corrupt(&self, cid: &Cid, bytes: Vec<u8>) {
        self.records.write().unwrap().insert(cid.clone(), bytes);
    }

    pub fn len(&self) -> usize {
        self.records.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl Resolver for MemoryResolver {
    fn fetch(&self, cid: &Cid) -> Result<Option<Vec<u8>>> {
        Ok(self.records.read().unwrap().get(cid).cloned())
    }
}
