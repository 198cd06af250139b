//! Core of the DataDock research data hub: accounts and tokens, datasets over
//! a content-addressed blob store, organizations, reviews, messaging and
//! notifications, all persisted in an embedded SQLite database.

pub mod auth;
pub mod backup;
pub mod blobstore;
pub mod catalog;
pub mod clock;
pub mod config;
pub mod error;
pub mod hub;
pub mod messaging;
pub mod model;
pub mod notifications;
pub mod organizations;
pub mod persistence;
pub mod reviews;

#[cfg(test)]
mod test_support;

pub use auth::{
    hash_password, hash_token, verify_password, IssuedToken, ProfileChanges, Registration,
};
pub use blobstore::{BlobDigest, BlobReader, BlobStat, BlobStore};
pub use catalog::{
    can_view, ArchivePlan, DatasetDetail, DatasetDraft, DatasetMeta, DatasetSummary, DraftFile,
    MetadataChanges, SearchQuery, UploadSession,
};
pub use clock::{Clock, ManualClock, SystemClock};
pub use config::{HubConfig, PasswordCost};
pub use error::{Error, Result};
pub use hub::{DataHub, Page, PageRequest, Principal};
pub use messaging::{ConversationView, MessageView};
pub use model::*;
pub use organizations::{Departure, MemberView};
pub use reviews::{RatingSummary, ReviewChanges};
