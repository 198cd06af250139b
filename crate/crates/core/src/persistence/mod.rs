//! Transactional storage on a single-file embedded SQLite database.
//!
//! Writes go through one connection guarded by a mutex, so write transactions
//! are serialized in-process; reads use a small pool of WAL-mode connections
//! and observe the last committed state. Migrations are embedded and tracked
//! with `PRAGMA user_version`.

pub mod repo;

use std::path::{Path, PathBuf};
use std::time::Duration;

use parking_lot::Mutex;
use rusqlite::functions::FunctionFlags;
use rusqlite::{Connection, ErrorCode, OpenFlags, Transaction, TransactionBehavior};

use crate::error::Error;

/// Embedded migrations, applied in order. Version `n` means the first `n` ran.
pub const MIGRATIONS: &[(&str, &str)] = &[
    (
        "0001_initial_schema",
        include_str!("migrations/0001_initial_schema.sql"),
    ),
    (
        "0002_lookup_indexes",
        include_str!("migrations/0002_lookup_indexes.sql"),
    ),
];

pub const LATEST_VERSION: SchemaVersion = SchemaVersion(MIGRATIONS.len() as u32);

const READ_POOL: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct SchemaVersion(pub u32);

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("uniqueness violation: {0}")]
    UniquenessViolation(String),

    #[error("foreign key violation: {0}")]
    ForeignKeyViolation(String),

    #[error("record not found")]
    NotFound,

    /// The store was busy or a transaction conflicted; the caller may retry.
    #[error("transaction conflict: {0}")]
    Conflict(String),

    #[error("store unavailable: {0}")]
    Unavailable(String),

    #[error("migration {name} failed: {message}")]
    MigrationFailure { name: String, message: String },

    #[error("cannot migrate from version {current} down to {target}")]
    Downgrade { current: u32, target: u32 },

    #[error(transparent)]
    Sqlite(rusqlite::Error),
}

impl From<rusqlite::Error> for StoreError {
    fn from(err: rusqlite::Error) -> Self {
        match &err {
            rusqlite::Error::SqliteFailure(code, msg) => {
                let detail = msg.clone().unwrap_or_else(|| code.to_string());
                match code.extended_code {
                    rusqlite::ffi::SQLITE_CONSTRAINT_UNIQUE
                    | rusqlite::ffi::SQLITE_CONSTRAINT_PRIMARYKEY => {
                        StoreError::UniquenessViolation(detail)
                    }
                    rusqlite::ffi::SQLITE_CONSTRAINT_FOREIGNKEY => {
                        StoreError::ForeignKeyViolation(detail)
                    }
                    _ => match code.code {
                        ErrorCode::DatabaseBusy | ErrorCode::DatabaseLocked => {
                            StoreError::Conflict(detail)
                        }
                        ErrorCode::CannotOpen | ErrorCode::NotADatabase => {
                            StoreError::Unavailable(detail)
                        }
                        _ => StoreError::Sqlite(err),
                    },
                }
            }
            rusqlite::Error::QueryReturnedNoRows => StoreError::NotFound,
            _ => StoreError::Sqlite(err),
        }
    }
}

pub struct Store {
    path: PathBuf,
    writer: Mutex<Connection>,
    readers: Mutex<Vec<Connection>>,
}

impl std::fmt::Debug for Store {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Store").field("path", &self.path).finish()
    }
}

fn open_connection(path: &Path) -> Result<Connection, StoreError> {
    let conn = Connection::open_with_flags(
        path,
        OpenFlags::SQLITE_OPEN_READ_WRITE
            | OpenFlags::SQLITE_OPEN_CREATE
            | OpenFlags::SQLITE_OPEN_NO_MUTEX,
    )
    .map_err(|e| StoreError::Unavailable(format!("{}: {e}", path.display())))?;
    conn.busy_timeout(Duration::from_secs(5))?;
    conn.pragma_update(None, "journal_mode", "WAL")?;
    conn.pragma_update(None, "synchronous", "NORMAL")?;
    conn.pragma_update(None, "foreign_keys", "ON")?;
    // Unicode-aware lowercasing; SQLite's lower() only folds ASCII.
    conn.create_scalar_function(
        "casefold",
        1,
        FunctionFlags::SQLITE_UTF8 | FunctionFlags::SQLITE_DETERMINISTIC,
        |ctx| {
            let text: Option<String> = ctx.get(0)?;
            Ok(text.map(|t| t.to_lowercase()))
        },
    )?;
    Ok(conn)
}

impl Store {
    /// Opens the database file without migrating it.
    pub fn open(path: &Path) -> Result<Self, StoreError> {
        let writer = open_connection(path)?;
        Ok(Store {
            path: path.to_owned(),
            writer: Mutex::new(writer),
            readers: Mutex::new(Vec::new()),
        })
    }

    /// Opens the file and migrates it to [`LATEST_VERSION`].
    pub fn open_latest(path: &Path) -> Result<Self, StoreError> {
        let store = Self::open(path)?;
        store.migrate(LATEST_VERSION)?;
        Ok(store)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn version(&self) -> Result<SchemaVersion, StoreError> {
        let conn = self.writer.lock();
        current_version(&conn)
    }

    /// Applies migrations `(current, target]`, each in its own transaction.
    pub fn migrate(&self, target: SchemaVersion) -> Result<SchemaVersion, StoreError> {
        let mut conn = self.writer.lock();
        let current = current_version(&conn)?;
        if target < current {
            return Err(StoreError::Downgrade {
                current: current.0,
                target: target.0,
            });
        }
        if target > LATEST_VERSION {
            return Err(StoreError::MigrationFailure {
                name: format!("version {}", target.0),
                message: "no such migration".into(),
            });
        }
        for (index, (name, sql)) in MIGRATIONS
            .iter()
            .enumerate()
            .take(target.0 as usize)
            .skip(current.0 as usize)
        {
            let failure = |e: rusqlite::Error| StoreError::MigrationFailure {
                name: (*name).to_owned(),
                message: e.to_string(),
            };
            let tx = conn
                .transaction_with_behavior(TransactionBehavior::Exclusive)
                .map_err(failure)?;
            tx.execute_batch(sql).map_err(failure)?;
            tx.pragma_update(None, "user_version", index as u32 + 1)
                .map_err(failure)?;
            tx.commit().map_err(failure)?;
            tracing::info!(migration = name, "applied migration");
        }
        current_version(&conn)
    }

    /// Runs `work` inside an immediate write transaction. Commits on `Ok`,
    /// rolls back on `Err`.
    pub fn with_transaction<T, E>(
        &self,
        work: impl FnOnce(&Transaction<'_>) -> Result<T, E>,
    ) -> Result<T, E>
    where
        E: From<StoreError>,
    {
        let mut conn = self.writer.lock();
        let tx = conn
            .transaction_with_behavior(TransactionBehavior::Immediate)
            .map_err(StoreError::from)?;
        match work(&tx) {
            Ok(value) => {
                tx.commit().map_err(StoreError::from)?;
                Ok(value)
            }
            Err(err) => {
                drop(tx);
                Err(err)
            }
        }
    }

    /// Runs `work` on a pooled read connection inside a read transaction, so
    /// every query sees the same committed snapshot.
    pub fn read<T, E>(&self, work: impl FnOnce(&Connection) -> Result<T, E>) -> Result<T, E>
    where
        E: From<StoreError>,
    {
        let conn = match self.readers.lock().pop() {
            Some(conn) => conn,
            None => open_connection(&self.path)?,
        };
        let result = (|| {
            let tx = conn.unchecked_transaction().map_err(StoreError::from)?;
            let value = work(&tx)?;
            tx.finish().map_err(StoreError::from)?;
            Ok(value)
        })();
        let mut pool = self.readers.lock();
        if pool.len() < READ_POOL {
            pool.push(conn);
        }
        result
    }

    /// Writes a consistent copy of the database to `dest` using SQLite's online backup.
    pub fn backup_to(&self, dest: &Path) -> Result<(), StoreError> {
        let conn = self.writer.lock();
        conn.backup(rusqlite::DatabaseName::Main, dest, None)?;
        Ok(())
    }

    /// Runs SQLite's integrity and foreign key checks.
    pub fn integrity_check(&self) -> Result<bool, StoreError> {
        let conn = self.writer.lock();
        let verdict: String = conn.query_row("PRAGMA integrity_check", [], |r| r.get(0))?;
        let fk_violations: i64 =
            conn.query_row("SELECT count(*) FROM pragma_foreign_key_check", [], |r| {
                r.get(0)
            })?;
        Ok(verdict == "ok" && fk_violations == 0)
    }
}

fn current_version(conn: &Connection) -> Result<SchemaVersion, StoreError> {
    let v: u32 = conn.pragma_query_value(None, "user_version", |r| r.get(0))?;
    Ok(SchemaVersion(v))
}

impl Error {
    pub(crate) fn is_unique_violation(&self) -> bool {
        matches!(self, Error::Store(StoreError::UniquenessViolation(_)))
    }
}
