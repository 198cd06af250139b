use std::fs;
use std::io;
use std::sync::Arc;

use crate::blobstore::BlobStore;
use crate::clock::{Clock, SystemClock};
use crate::config::HubConfig;
use crate::error::{Error, Result};
use crate::model::{Timestamp, UserAccount};
use crate::persistence::{Store, LATEST_VERSION};

/// The service facade. Each domain module adds its operations through its own
/// `impl DataHub` block.
pub struct DataHub {
    pub(crate) config: HubConfig,
    pub(crate) store: Store,
    pub(crate) blobs: BlobStore,
    pub(crate) clock: Arc<dyn Clock>,
}

impl std::fmt::Debug for DataHub {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DataHub")
            .field("config", &self.config)
            .field("store", &self.store)
            .finish()
    }
}

impl DataHub {
    /// Opens the data directory, creating it (but not its parents) if needed,
    /// and migrates the store to the latest schema.
    pub fn open(config: HubConfig) -> Result<Self> {
        Self::open_with_clock(config, Arc::new(SystemClock))
    }

    pub fn open_with_clock(config: HubConfig, clock: Arc<dyn Clock>) -> Result<Self> {
        match fs::create_dir(&config.data_dir) {
            Ok(()) => {}
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists && config.data_dir.is_dir() => {}
            Err(e) => {
                return Err(Error::Io(io::Error::new(
                    e.kind(),
                    format!("data dir {}: {e}", config.data_dir.display()),
                )))
            }
        }
        let store = Store::open(&config.db_path())?;
        store.migrate(LATEST_VERSION)?;
        let blobs = BlobStore::open(&config.data_dir, config.max_file_bytes)?;
        Ok(DataHub {
            config,
            store,
            blobs,
            clock,
        })
    }

    pub fn config(&self) -> &HubConfig {
        &self.config
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn blobs(&self) -> &BlobStore {
        &self.blobs
    }

    pub fn now(&self) -> Timestamp {
        self.clock.now()
    }
}

/// An authenticated caller: the account plus the token it presented, if any.
#[derive(Clone, Debug)]
pub struct Principal {
    pub user: UserAccount,
    pub token_id: Option<crate::model::TokenId>,
}

impl Principal {
    pub fn id(&self) -> crate::model::UserId {
        self.user.id
    }
}

/// Page selection shared by every listing, 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PageRequest {
    pub page: u32,
    pub page_size: u32,
}

pub const DEFAULT_PAGE_SIZE: u32 = 20;
pub const MAX_PAGE_SIZE: u32 = 100;

impl Default for PageRequest {
    fn default() -> Self {
        PageRequest {
            page: 1,
            page_size: DEFAULT_PAGE_SIZE,
        }
    }
}

impl PageRequest {
    pub fn new(page: u32, page_size: u32) -> Result<Self> {
        if page < 1 {
            return Err(Error::validation("page", "page must be at least 1"));
        }
        if !(1..=MAX_PAGE_SIZE).contains(&page_size) {
            return Err(Error::validation(
                "page_size",
                format!("page_size must be between 1 and {MAX_PAGE_SIZE}"),
            ));
        }
        Ok(PageRequest { page, page_size })
    }
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Page<T> {
    pub items: Vec<T>,
    pub page: u32,
    pub page_size: u32,
    pub total: u64,
}

impl<T> Page<T> {
    pub fn new(items: Vec<T>, req: PageRequest, total: u64) -> Self {
        Page {
            items,
            page: req.page,
            page_size: req.page_size,
            total,
        }
    }

    pub fn map<U>(self, f: impl FnMut(T) -> U) -> Page<U> {
        Page {
            items: self.items.into_iter().map(f).collect(),
            page: self.page,
            page_size: self.page_size,
            total: self.total,
        }
    }
}
