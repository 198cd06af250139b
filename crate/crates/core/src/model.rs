//! Entity types shared by every service, plus the boundary normalizers for
//! tags, paths, usernames and emails.
//!
//! Every type that carries invariants exposes a `validate` predicate, and the
//! constructors used by the services run it before a value is persisted.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, SecondsFormat, TimeZone, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use uuid::Uuid;

use crate::blobstore::BlobDigest;
use crate::error::{Error, Result};

pub const MAX_DATASET_NAME: usize = 200;
pub const MAX_DESCRIPTION: usize = 10_000;
pub const MAX_COMMENT: usize = 5_000;
pub const MAX_PATH: usize = 1024;
pub const MAX_TAG: usize = 50;
pub const MAX_ORG_NAME: usize = 100;
pub const MAX_MESSAGE: usize = 10_000;
pub const MAX_DISPLAY_NAME: usize = 100;
pub const MIN_PASSWORD: usize = 10;
pub const DEFAULT_CONTENT_TYPE: &str = "application/octet-stream";

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(Uuid);

        impl $name {
            pub fn new() -> Self {
                Self(Uuid::new_v4())
            }

            pub fn as_uuid(&self) -> &Uuid {
                &self.0
            }
        }

        impl Default for $name {
            fn default() -> Self {
                Self::new()
            }
        }

        impl From<Uuid> for $name {
            fn from(value: Uuid) -> Self {
                Self(value)
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                self.0.hyphenated().fmt(f)
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}({})", stringify!($name), self.0)
            }
        }

        impl FromStr for $name {
            type Err = uuid::Error;

            fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
                Uuid::parse_str(s).map(Self)
            }
        }

        impl rusqlite::ToSql for $name {
            fn to_sql(&self) -> rusqlite::Result<rusqlite::types::ToSqlOutput<'_>> {
                Ok(rusqlite::types::ToSqlOutput::from(self.to_string()))
            }
        }

        impl rusqlite::types::FromSql for $name {
            fn column_result(
                value: rusqlite::types::ValueRef<'_>,
            ) -> rusqlite::types::FromSqlResult<Self> {
                let text = value.as_str()?;
                Uuid::parse_str(text)
                    .map(Self)
                    .map_err(|e| rusqlite::types::FromSqlError::Other(Box::new(e)))
            }
        }
    };
}

id_type!(UserId);
id_type!(TokenId);
id_type!(DatasetId);
id_type!(ReviewId);
id_type!(OrgId);
id_type!(ConversationId);
id_type!(MessageId);
id_type!(NotificationId);

/// UTC instant with microsecond resolution.
///
/// Encodes as RFC 3339 with a `Z` suffix; fractional seconds are emitted only
/// when non-zero, so whole-second values look like `2024-01-02T03:04:05Z`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp(i64);

impl Timestamp {
    pub fn from_micros(micros: i64) -> Self {
        Self(micros)
    }

    pub fn from_datetime(dt: DateTime<Utc>) -> Self {
        Self(dt.timestamp_micros())
    }

    pub fn as_micros(&self) -> i64 {
        self.0
    }

    pub fn to_datetime(&self) -> DateTime<Utc> {
        Utc.timestamp_micros(self.0)
            .single()
            .expect("timestamp within chrono range")
    }

    pub fn plus_seconds(&self, secs: i64) -> Self {
        Self(self.0 + secs * 1_000_000)
    }

    pub fn to_rfc3339(&self) -> String {
        self.to_datetime()
            .to_rfc3339_opts(SecondsFormat::AutoSi, true)
    }

    pub fn parse_rfc3339(s: &str) -> Option<Self> {
        DateTime::parse_from_rfc3339(s)
            .ok()
            .map(|dt| Self::from_datetime(dt.with_timezone(&Utc)))
    }
}

impl fmt::Debug for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_rfc3339())
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_rfc3339())
    }
}

impl Serialize for Timestamp {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_rfc3339())
    }
}

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        Timestamp::parse_rfc3339(&raw)
            .ok_or_else(|| serde::de::Error::custom(format!("invalid RFC 3339 timestamp: {raw}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Visibility {
    Public,
    #[serde(rename = "org")]
    OrgOnly,
    Private,
}

impl Visibility {
    pub fn as_str(&self) -> &'static str {
        match self {
            Visibility::Public => "public",
            Visibility::OrgOnly => "org",
            Visibility::Private => "private",
        }
    }
}

impl FromStr for Visibility {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "public" => Ok(Visibility::Public),
            "org" => Ok(Visibility::OrgOnly),
            "private" => Ok(Visibility::Private),
            other => Err(Error::validation(
                "visibility",
                format!("expected one of public, org, private; got {other:?}"),
            )),
        }
    }
}

/// A normalized tag: trimmed, lowercase, `[a-z0-9][a-z0-9 _-]*`, 1 to 50 chars.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct Tag(String);

impl Tag {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl<'de> Deserialize<'de> for Tag {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        normalize_tag(&raw).map_err(serde::de::Error::custom)
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

pub fn normalize_tag(raw: &str) -> Result<Tag> {
    let value = raw.trim().to_lowercase();
    if value.is_empty() {
        return Err(Error::validation("tags", "tag is empty"));
    }
    if value.chars().count() > MAX_TAG {
        return Err(Error::validation(
            "tags",
            format!("tag longer than {MAX_TAG} characters"),
        ));
    }
    let mut chars = value.chars();
    let first_ok = chars
        .next()
        .is_some_and(|c| c.is_ascii_lowercase() || c.is_ascii_digit());
    let rest_ok =
        chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || matches!(c, ' ' | '_' | '-'));
    if !first_ok || !rest_ok {
        return Err(Error::validation(
            "tags",
            format!("tag {value:?} may only contain a-z, 0-9, space, '_' and '-'"),
        ));
    }
    Ok(Tag(value))
}

pub fn normalize_tags<I, S>(raw: I) -> Result<BTreeSet<Tag>>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    raw.into_iter().map(|t| normalize_tag(t.as_ref())).collect()
}

/// Accepts a relative, slash-separated path with no empty, `.` or `..` segments.
pub fn validate_path(raw: &str) -> Result<String> {
    let fail = |msg: &str| Err(Error::validation("path", format!("{raw:?}: {msg}")));
    if raw.is_empty() {
        return fail("path is empty");
    }
    if raw.len() > MAX_PATH {
        return fail("path longer than 1024 bytes");
    }
    if raw.starts_with('/') {
        return fail("absolute paths are not allowed");
    }
    for segment in raw.split('/') {
        match segment {
            "" => return fail("empty path segment"),
            "." | ".." => return fail("relative path segments are not allowed"),
            _ => {}
        }
        if segment.contains('\0') || segment.contains('\\') {
            return fail("path contains a forbidden character");
        }
    }
    Ok(raw.to_owned())
}

pub fn validate_username(raw: &str) -> Result<String> {
    let value = raw.to_lowercase();
    let len = value.chars().count();
    if !(3..=32).contains(&len) {
        return Err(Error::validation(
            "username",
            "username must be 3 to 32 characters",
        ));
    }
    if !value
        .chars()
        .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_' || c == '-')
    {
        return Err(Error::validation(
            "username",
            "username may only contain a-z, 0-9, '_' and '-'",
        ));
    }
    Ok(value)
}

pub fn validate_email(raw: &str) -> Result<String> {
    let value = raw.trim();
    let mut parts = value.split('@');
    let ok = match (parts.next(), parts.next(), parts.next()) {
        (Some(local), Some(domain), None) => {
            !local.is_empty() && !domain.is_empty() && !value.chars().any(char::is_whitespace)
        }
        _ => false,
    };
    if ok {
        Ok(value.to_owned())
    } else {
        Err(Error::validation("email", "expected local@domain"))
    }
}

pub fn validate_password(raw: &str) -> Result<()> {
    if raw.chars().count() < MIN_PASSWORD {
        return Err(Error::validation(
            "password",
            format!("password must be at least {MIN_PASSWORD} characters"),
        ));
    }
    Ok(())
}

pub fn validate_display_name(raw: &str) -> Result<String> {
    let value = raw.trim();
    if value.chars().count() > MAX_DISPLAY_NAME {
        return Err(Error::validation("display_name", "display name too long"));
    }
    Ok(value.to_owned())
}

pub(crate) fn check_len(field: &str, value: &str, min: usize, max: usize) -> Result<()> {
    let len = value.chars().count();
    if len < min || len > max {
        return Err(Error::validation(
            field,
            format!("must be between {min} and {max} characters"),
        ));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UserAccount {
    pub id: UserId,
    pub username: String,
    pub email: String,
    pub password_digest: String,
    pub display_name: String,
    pub is_admin: bool,
    pub created_at: Timestamp,
    pub is_active: bool,
    /// Set when the account was deleted; the row is kept as a tombstone so
    /// the username stays retired and conversation history keeps a sender.
    pub deleted_at: Option<Timestamp>,
}

impl UserAccount {
    pub fn is_deleted(&self) -> bool {
        self.deleted_at.is_some()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub blob_digest: BlobDigest,
    pub size_bytes: u64,
    pub content_type: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    pub id: DatasetId,
    pub owner_id: UserId,
    pub name: String,
    pub description: String,
    pub visibility: Visibility,
    pub org_ids: BTreeSet<OrgId>,
    pub tags: BTreeSet<Tag>,
    pub created_at: Timestamp,
    pub updated_at: Timestamp,
    pub entries: Vec<FileEntry>,
}

impl Dataset {
    pub fn validate(&self) -> Result<()> {
        check_len("name", &self.name, 1, MAX_DATASET_NAME)?;
        check_len("description", &self.description, 0, MAX_DESCRIPTION)?;
        check_visibility(self.visibility, &self.org_ids)?;
        if self.entries.is_empty() {
            return Err(Error::validation(
                "files",
                "a dataset needs at least one file",
            ));
        }
        let mut seen = BTreeSet::new();
        for entry in &self.entries {
            validate_path(&entry.path)?;
            if !seen.insert(entry.path.as_str()) {
                return Err(Error::validation(
                    "path",
                    format!("duplicate path {:?}", entry.path),
                ));
            }
        }
        Ok(())
    }

    pub fn total_size(&self) -> u64 {
        self.entries.iter().map(|e| e.size_bytes).sum()
    }
}

pub(crate) fn check_visibility(visibility: Visibility, org_ids: &BTreeSet<OrgId>) -> Result<()> {
    match (visibility, org_ids.is_empty()) {
        (Visibility::OrgOnly, true) => Err(Error::validation(
            "org_ids",
            "org visibility requires at least one organization",
        )),
        (Visibility::Public | Visibility::Private, false) => Err(Error::validation(
            "org_ids",
            "organizations may only be set with org visibility",
        )),
        _ => Ok(()),
    }
}

/// Integer star rating in 1..=5.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct Rating(u8);

impl Rating {
    pub fn new(value: i64) -> Result<Self> {
        if (1..=5).contains(&value) {
            Ok(Rating(value as u8))
        } else {
            Err(Error::validation(
                "rating",
                "rating must be an integer from 1 to 5",
            ))
        }
    }

    pub fn get(&self) -> u8 {
        self.0
    }
}

impl<'de> Deserialize<'de> for Rating {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = i64::deserialize(deserializer)?;
        Rating::new(raw).map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Review {
    pub id: ReviewId,
    pub dataset_id: DatasetId,
    pub author_id: UserId,
    pub rating: Rating,
    pub comment: String,
    pub created_at: Timestamp,
    pub updated_at: Timestamp,
}

pub(crate) fn validate_comment(comment: &str) -> Result<()> {
    check_len("comment", comment, 0, MAX_COMMENT)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Organization {
    pub id: OrgId,
    pub name: String,
    pub description: String,
    pub creator_id: UserId,
    pub created_at: Timestamp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Owner,
    Member,
}

impl Role {
    pub fn as_str(&self) -> &'static str {
        match self {
            Role::Owner => "owner",
            Role::Member => "member",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "owner" => Some(Role::Owner),
            "member" => Some(Role::Member),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Membership {
    pub org_id: OrgId,
    pub user_id: UserId,
    pub role: Role,
    pub joined_at: Timestamp,
}

/// Conversation between two distinct users. Participants are kept sorted so
/// that an unordered pair has a single representation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conversation {
    pub id: ConversationId,
    pub participants: [UserId; 2],
    pub created_at: Timestamp,
}

impl Conversation {
    pub fn pair(a: UserId, b: UserId) -> Result<[UserId; 2]> {
        match a.cmp(&b) {
            std::cmp::Ordering::Less => Ok([a, b]),
            std::cmp::Ordering::Greater => Ok([b, a]),
            std::cmp::Ordering::Equal => Err(Error::validation(
                "user_id",
                "cannot start a conversation with yourself",
            )),
        }
    }

    pub fn includes(&self, user: UserId) -> bool {
        self.participants.contains(&user)
    }

    pub fn other(&self, user: UserId) -> UserId {
        if self.participants[0] == user {
            self.participants[1]
        } else {
            self.participants[0]
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub id: MessageId,
    pub conversation_id: ConversationId,
    pub sender_id: UserId,
    pub body: String,
    pub sent_at: Timestamp,
}

pub(crate) fn validate_message_body(body: &str) -> Result<()> {
    if body.trim().is_empty() {
        return Err(Error::validation("body", "message body is empty"));
    }
    check_len("body", body, 1, MAX_MESSAGE)
}

/// What a notification is about. The variant fixes which subject ids exist.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "subject_ids", rename_all = "snake_case")]
pub enum NotificationEvent {
    DatasetInOrg {
        dataset_id: DatasetId,
        org_id: OrgId,
    },
    ReviewReceived {
        dataset_id: DatasetId,
        review_id: ReviewId,
    },
    MessageReceived {
        conversation_id: ConversationId,
        message_id: MessageId,
    },
}

impl NotificationEvent {
    pub fn kind(&self) -> &'static str {
        match self {
            NotificationEvent::DatasetInOrg { .. } => "dataset_in_org",
            NotificationEvent::ReviewReceived { .. } => "review_received",
            NotificationEvent::MessageReceived { .. } => "message_received",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Notification {
    pub id: NotificationId,
    pub recipient_id: UserId,
    #[serde(flatten)]
    pub event: NotificationEvent,
    pub is_read: bool,
    pub created_at: Timestamp,
}
