//! Content-addressed blob storage.
//!
//! Layout under the data directory:
//!
//! ```text
//! blobs/<first two hex chars>/<sha256 hex>
//! tmp/<random>            in-flight writes, renamed into place when complete
//! ```
//!
//! A blob becomes visible only through the final rename, so a crash mid-write
//! leaves at most a stray file in `tmp/`. Writers hold a [`BlobPin`] from the
//! moment their blob is visible until the referencing metadata has committed;
//! garbage collection never deletes a pinned digest, nor one that was pinned or
//! unpinned while the collection was running.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs::{self, File};
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use parking_lot::Mutex;
use rand::RngCore;
use serde::{Deserialize, Deserializer, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

const CHUNK: usize = 64 * 1024;

/// Lowercase hex SHA-256 of a blob's bytes.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct BlobDigest(String);

impl BlobDigest {
    pub fn of(bytes: &[u8]) -> Self {
        BlobDigest(hex::encode(Sha256::digest(bytes)))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    fn shard(&self) -> &str {
        &self.0[..2]
    }
}

impl FromStr for BlobDigest {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.len() == 64 && s.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f')) {
            Ok(BlobDigest(s.to_owned()))
        } else {
            Err(Error::validation(
                "blob_digest",
                "expected 64 lowercase hex chars",
            ))
        }
    }
}

impl<'de> Deserialize<'de> for BlobDigest {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

impl fmt::Display for BlobDigest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for BlobDigest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BlobDigest({})", self.0)
    }
}

impl rusqlite::ToSql for BlobDigest {
    fn to_sql(&self) -> rusqlite::Result<rusqlite::types::ToSqlOutput<'_>> {
        Ok(rusqlite::types::ToSqlOutput::from(self.0.as_str()))
    }
}

impl rusqlite::types::FromSql for BlobDigest {
    fn column_result(value: rusqlite::types::ValueRef<'_>) -> rusqlite::types::FromSqlResult<Self> {
        value
            .as_str()?
            .parse()
            .map_err(|e: Error| rusqlite::types::FromSqlError::Other(Box::new(e)))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlobStat {
    pub digest: BlobDigest,
    pub size_bytes: u64,
}

#[derive(Default)]
struct PinState {
    counts: HashMap<BlobDigest, usize>,
    /// Digests pinned or released while a collection is running.
    touched_during_gc: Option<HashSet<BlobDigest>>,
}

struct Inner {
    blobs_dir: PathBuf,
    tmp_dir: PathBuf,
    max_size: u64,
    pins: Mutex<PinState>,
    gc: Mutex<()>,
}

#[derive(Clone)]
pub struct BlobStore {
    inner: Arc<Inner>,
}

impl fmt::Debug for BlobStore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BlobStore")
            .field("blobs_dir", &self.inner.blobs_dir)
            .field("max_size", &self.inner.max_size)
            .finish()
    }
}

impl BlobStore {
    /// Opens (creating if needed) the blob directories under `data_dir`.
    pub fn open(data_dir: &Path, max_size: u64) -> Result<Self> {
        let blobs_dir = data_dir.join("blobs");
        let tmp_dir = data_dir.join("tmp");
        fs::create_dir_all(&blobs_dir)?;
        fs::create_dir_all(&tmp_dir)?;
        Ok(BlobStore {
            inner: Arc::new(Inner {
                blobs_dir,
                tmp_dir,
                max_size,
                pins: Mutex::new(PinState::default()),
                gc: Mutex::new(()),
            }),
        })
    }

    pub fn max_size(&self) -> u64 {
        self.inner.max_size
    }

    fn blob_path(&self, digest: &BlobDigest) -> PathBuf {
        self.inner
            .blobs_dir
            .join(digest.shard())
            .join(digest.as_str())
    }

    /// Starts an incremental write. Nothing is visible until [`BlobWriter::finish`].
    pub fn writer(&self) -> Result<BlobWriter> {
        let mut name = [0u8; 16];
        rand::thread_rng().fill_bytes(&mut name);
        let tmp_path = self.inner.tmp_dir.join(hex::encode(name));
        let file = File::create_new(&tmp_path)?;
        Ok(BlobWriter {
            store: self.clone(),
            file: Some(file),
            tmp_path,
            hasher: Sha256::new(),
            written: 0,
        })
    }

    /// Streams `reader` into the store and keeps the result pinned.
    pub fn put_pinned(&self, mut reader: impl Read) -> Result<BlobPin> {
        let mut writer = self.writer()?;
        let mut buf = vec![0u8; CHUNK];
        loop {
            let n = match reader.read(&mut buf) {
                Ok(0) => break,
                Ok(n) => n,
                Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
                Err(e) => return Err(e.into()),
            };
            writer.write_chunk(&buf[..n])?;
        }
        writer.finish()
    }

    pub fn put_blob(&self, reader: impl Read) -> Result<BlobStat> {
        Ok(self.put_pinned(reader)?.stat())
    }

    /// Opens a stored blob for streaming reads.
    pub fn get_blob(&self, digest: &BlobDigest) -> Result<BlobReader> {
        match File::open(self.blob_path(digest)) {
            Ok(file) => {
                let size_bytes = file.metadata()?.len();
                Ok(BlobReader { file, size_bytes })
            }
            Err(e) if e.kind() == io::ErrorKind::NotFound => {
                Err(Error::not_found(format!("blob {digest}")))
            }
            Err(e) => Err(e.into()),
        }
    }

    pub fn path_of(&self, digest: &BlobDigest) -> Result<PathBuf> {
        let path = self.blob_path(digest);
        if path.is_file() {
            Ok(path)
        } else {
            Err(Error::not_found(format!("blob {digest}")))
        }
    }

    pub fn contains(&self, digest: &BlobDigest) -> bool {
        self.blob_path(digest).is_file()
    }

    /// Every stored blob, in no particular order.
    pub fn list(&self) -> Result<Vec<BlobStat>> {
        let mut out = Vec::new();
        for shard in fs::read_dir(&self.inner.blobs_dir)? {
            let shard = shard?;
            if !shard.file_type()?.is_dir() {
                continue;
            }
            for entry in fs::read_dir(shard.path())? {
                let entry = entry?;
                let Some(name) = entry.file_name().to_str().map(str::to_owned) else {
                    continue;
                };
                let Ok(digest) = name.parse::<BlobDigest>() else {
                    continue;
                };
                let size_bytes = entry.metadata()?.len();
                out.push(BlobStat { digest, size_bytes });
            }
        }
        Ok(out)
    }

    /// Recomputes every blob's digest and returns the ones that do not match their key.
    pub fn fsck(&self) -> Result<Vec<BlobDigest>> {
        let mut bad = Vec::new();
        for stat in self.list()? {
            let mut reader = self.get_blob(&stat.digest)?;
            let mut hasher = Sha256::new();
            io::copy(&mut reader, &mut HashSink(&mut hasher))?;
            if hex::encode(hasher.finalize()) != stat.digest.as_str() {
                bad.push(stat.digest);
            }
        }
        Ok(bad)
    }

    /// Starts a collection. Blocks while another collection is running.
    ///
    /// The referenced set must be computed *after* this call returns, so that
    /// uploads which finish in between are recorded by the session.
    pub fn begin_gc(&self) -> GcSession<'_> {
        let guard = self.inner.gc.lock();
        self.inner.pins.lock().touched_during_gc = Some(HashSet::new());
        GcSession {
            store: self,
            _guard: guard,
        }
    }

    /// Deletes every blob that is not in `referenced` and not pinned.
    pub fn collect_garbage(&self, referenced: &HashSet<BlobDigest>) -> Result<usize> {
        self.begin_gc().sweep(referenced)
    }

    fn pin(&self, digest: &BlobDigest, state: &mut PinState) {
        *state.counts.entry(digest.clone()).or_insert(0) += 1;
        if let Some(touched) = state.touched_during_gc.as_mut() {
            touched.insert(digest.clone());
        }
    }

    fn unpin(&self, digest: &BlobDigest, state: &mut PinState) {
        if let Some(count) = state.counts.get_mut(digest) {
            *count -= 1;
            if *count == 0 {
                state.counts.remove(digest);
            }
        }
        if let Some(touched) = state.touched_during_gc.as_mut() {
            touched.insert(digest.clone());
        }
    }
}

pub struct GcSession<'a> {
    store: &'a BlobStore,
    _guard: parking_lot::MutexGuard<'a, ()>,
}

impl GcSession<'_> {
    pub fn sweep(self, referenced: &HashSet<BlobDigest>) -> Result<usize> {
        let mut deleted = 0;
        for stat in self.store.list()? {
            if referenced.contains(&stat.digest) {
                continue;
            }
            let state = self.store.inner.pins.lock();
            let pinned = state.counts.contains_key(&stat.digest);
            let touched = state
                .touched_during_gc
                .as_ref()
                .is_some_and(|t| t.contains(&stat.digest));
            if pinned || touched {
                continue;
            }
            match fs::remove_file(self.store.blob_path(&stat.digest)) {
                Ok(()) => deleted += 1,
                Err(e) if e.kind() == io::ErrorKind::NotFound => {}
                Err(e) => return Err(e.into()),
            }
            drop(state);
        }
        tracing::debug!(deleted, "blob garbage collection finished");
        Ok(deleted)
    }
}

impl Drop for GcSession<'_> {
    fn drop(&mut self) {
        self.store.inner.pins.lock().touched_during_gc = None;
    }
}

/// Incremental blob write into `tmp/`. Dropping it unfinished removes the file.
pub struct BlobWriter {
    store: BlobStore,
    file: Option<File>,
    tmp_path: PathBuf,
    hasher: Sha256,
    written: u64,
}

impl BlobWriter {
    pub fn write_chunk(&mut self, chunk: &[u8]) -> Result<()> {
        let limit = self.store.inner.max_size;
        if self.written + chunk.len() as u64 > limit {
            return Err(Error::TooLarge { limit });
        }
        self.file
            .as_mut()
            .expect("writer used after finish")
            .write_all(chunk)?;
        self.hasher.update(chunk);
        self.written += chunk.len() as u64;
        Ok(())
    }

    pub fn written(&self) -> u64 {
        self.written
    }

    pub fn finish(mut self) -> Result<BlobPin> {
        let file = self.file.take().expect("writer finished twice");
        file.sync_all()?;
        drop(file);
        let hasher = std::mem::take(&mut self.hasher);
        let digest = BlobDigest(hex::encode(hasher.finalize()));
        let target = self.store.blob_path(&digest);

        let store = self.store.clone();
        let mut state = store.inner.pins.lock();
        store.pin(&digest, &mut state);
        let created = if target.is_file() {
            let _ = fs::remove_file(&self.tmp_path);
            false
        } else {
            let placed = fs::create_dir_all(target.parent().expect("sharded path"))
                .and_then(|()| fs::rename(&self.tmp_path, &target));
            if let Err(e) = placed {
                store.unpin(&digest, &mut state);
                return Err(e.into());
            }
            true
        };
        drop(state);
        self.tmp_path = PathBuf::new();

        Ok(BlobPin {
            store,
            stat: BlobStat {
                digest,
                size_bytes: self.written,
            },
            created,
            released: false,
        })
    }
}

impl Drop for BlobWriter {
    fn drop(&mut self) {
        if !self.tmp_path.as_os_str().is_empty() {
            self.file.take();
            let _ = fs::remove_file(&self.tmp_path);
        }
    }
}

/// Keeps a freshly written blob safe from garbage collection until dropped.
pub struct BlobPin {
    store: BlobStore,
    stat: BlobStat,
    created: bool,
    released: bool,
}

impl BlobPin {
    pub fn stat(&self) -> BlobStat {
        self.stat.clone()
    }

    pub fn digest(&self) -> &BlobDigest {
        &self.stat.digest
    }

    /// Whether this write created the file rather than deduplicating onto an
    /// existing one.
    pub fn created(&self) -> bool {
        self.created
    }

    /// Rolls back an abandoned write: removes the blob if this pin created it,
    /// nobody else holds a pin, and `is_referenced` reports no committed user.
    pub fn discard(mut self, is_referenced: impl FnOnce(&BlobDigest) -> bool) -> Result<bool> {
        let store = self.store.clone();
        let mut state = store.inner.pins.lock();
        let sole = state.counts.get(&self.stat.digest) == Some(&1);
        let mut removed = false;
        if self.created && sole && !is_referenced(&self.stat.digest) {
            match fs::remove_file(store.blob_path(&self.stat.digest)) {
                Ok(()) => removed = true,
                Err(e) if e.kind() == io::ErrorKind::NotFound => {}
                Err(e) => {
                    store.unpin(&self.stat.digest, &mut state);
                    self.released = true;
                    return Err(e.into());
                }
            }
        }
        store.unpin(&self.stat.digest, &mut state);
        self.released = true;
        Ok(removed)
    }
}

impl fmt::Debug for BlobPin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BlobPin")
            .field("stat", &self.stat)
            .field("created", &self.created)
            .finish()
    }
}

impl Drop for BlobPin {
    fn drop(&mut self) {
        if !self.released {
            let store = self.store.clone();
            let mut state = store.inner.pins.lock();
            store.unpin(&self.stat.digest, &mut state);
        }
    }
}

#[derive(Debug)]
pub struct BlobReader {
    file: File,
    size_bytes: u64,
}

impl BlobReader {
    pub fn size_bytes(&self) -> u64 {
        self.size_bytes
    }

    pub fn into_file(self) -> File {
        self.file
    }
}

impl Read for BlobReader {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        self.file.read(buf)
    }
}

struct HashSink<'a>(&'a mut Sha256);

impl Write for HashSink<'_> {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        self.0.update(buf);
        Ok(buf.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        Ok(())
    }
}
