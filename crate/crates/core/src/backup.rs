//! Snapshot and restore of a whole data directory as a tar stream holding the
//! database file and every blob.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::hub::DataHub;
use crate::persistence::{Store, LATEST_VERSION};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BackupReport {
    pub blobs: usize,
    pub bytes: u64,
}

impl DataHub {
    /// Writes a consistent snapshot to `out`. The database is copied with
    /// SQLite's online backup, and garbage collection is held off until the
    /// blobs have been archived, so every blob the snapshot references is present.
    pub fn backup<W: Write>(&self, out: W) -> Result<BackupReport> {
        let _no_gc = self.blobs.begin_gc();
        let scratch = tempfile::Builder::new()
            .prefix("backup-")
            .tempfile_in(self.config.data_dir.join("tmp"))?;
        self.store.backup_to(scratch.path())?;

        let mut tar = tar::Builder::new(out);
        tar.mode(tar::HeaderMode::Deterministic);
        tar.append_path_with_name(scratch.path(), "db")?;
        let mut report = BackupReport { blobs: 0, bytes: 0 };
        for stat in self.blobs.list()? {
            let path = self.blobs.path_of(&stat.digest)?;
            let name = format!("blobs/{}/{}", &stat.digest.as_str()[..2], stat.digest);
            tar.append_path_with_name(&path, name)?;
            report.blobs += 1;
            report.bytes += stat.size_bytes;
        }
        tar.into_inner()?.flush()?;
        tracing::info!(blobs = report.blobs, bytes = report.bytes, "backup written");
        Ok(report)
    }
}

/// Unpacks a backup into `data_dir`, which must be absent or empty, and
/// checks that the restored database opens cleanly.
pub fn restore<R: Read>(archive: R, data_dir: &Path) -> Result<()> {
    if data_dir.exists() && fs::read_dir(data_dir)?.next().is_some() {
        return Err(Error::conflict(format!(
            "{} is not empty",
            data_dir.display()
        )));
    }
    fs::create_dir_all(data_dir)?;
    let mut archive = tar::Archive::new(archive);
    for entry in archive.entries()? {
        let mut entry = entry?;
        let path = entry.path()?.into_owned();
        let allowed = path == Path::new("db") || path.starts_with("blobs");
        if !allowed {
            return Err(Error::validation(
                "archive",
                format!("unexpected entry {}", path.display()),
            ));
        }
        // unpack_in refuses entries that would escape data_dir.
        if !entry.unpack_in(data_dir)? {
            return Err(Error::validation(
                "archive",
                format!("unsafe entry {}", path.display()),
            ));
        }
    }
    let store = Store::open(&data_dir.join("db"))?;
    store.migrate(LATEST_VERSION)?;
    if !store.integrity_check()? {
        return Err(Error::validation(
            "archive",
            "restored database failed its integrity check",
        ));
    }
    Ok(())
}
