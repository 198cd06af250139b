//! Row-level CRUD for every entity. Each function takes a connection (or an
//! open transaction) and leaves transaction scoping to the caller.

use std::collections::BTreeSet;

use rusqlite::{params, Connection, OptionalExtension, Row};

use crate::error::Result;
use crate::model::*;

fn ts(row: &Row<'_>, idx: &str) -> rusqlite::Result<Timestamp> {
    Ok(Timestamp::from_micros(row.get(idx)?))
}

fn opt_ts(row: &Row<'_>, idx: &str) -> rusqlite::Result<Option<Timestamp>> {
    Ok(row.get::<_, Option<i64>>(idx)?.map(Timestamp::from_micros))
}

/// LIMIT/OFFSET for a 1-based page.
pub fn limit_offset(page: u32, page_size: u32) -> (i64, i64) {
    let page = page.max(1) as i64;
    (page_size as i64, (page - 1) * page_size as i64)
}

pub mod users {
    use super::*;

    const COLUMNS: &str = "id, username, email, password_digest, display_name, is_admin, \
                           is_active, created_at, deleted_at";

    fn from_row(row: &Row<'_>) -> rusqlite::Result<UserAccount> {
        Ok(UserAccount {
            id: row.get("id")?,
            username: row.get("username")?,
            email: row.get("email")?,
            password_digest: row.get("password_digest")?,
            display_name: row.get("display_name")?,
            is_admin: row.get("is_admin")?,
            is_active: row.get("is_active")?,
            created_at: ts(row, "created_at")?,
            deleted_at: opt_ts(row, "deleted_at")?,
        })
    }

    pub fn insert(conn: &Connection, user: &UserAccount) -> Result<()> {
        conn.execute(
            &format!("INSERT INTO users ({COLUMNS}) VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8, ?9)"),
            params![
                user.id,
                user.username,
                user.email,
                user.password_digest,
                user.display_name,
                user.is_admin,
                user.is_active,
                user.created_at.as_micros(),
                user.deleted_at.map(|t| t.as_micros()),
            ],
        )?;
        Ok(())
    }

    pub fn get(conn: &Connection, id: UserId) -> Result<Option<UserAccount>> {
        Ok(conn
            .query_row(
                &format!("SELECT {COLUMNS} FROM users WHERE id = ?1"),
                [id],
                from_row,
            )
            .optional()?)
    }

    pub fn get_by_username(conn: &Connection, username: &str) -> Result<Option<UserAccount>> {
        Ok(conn
            .query_row(
                &format!("SELECT {COLUMNS} FROM users WHERE username = ?1"),
                [username],
                from_row,
            )
            .optional()?)
    }

    pub fn update(conn: &Connection, user: &UserAccount) -> Result<bool> {
        let n = conn.execute(
            "UPDATE users SET username = ?2, email = ?3, password_digest = ?4, display_name = ?5, \
             is_admin = ?6, is_active = ?7, deleted_at = ?8 WHERE id = ?1",
            params![
                user.id,
                user.username,
                user.email,
                user.password_digest,
                user.display_name,
                user.is_admin,
                user.is_active,
                user.deleted_at.map(|t| t.as_micros()),
            ],
        )?;
        Ok(n == 1)
    }

    pub fn delete(conn: &Connection, id: UserId) -> Result<bool> {
        Ok(conn.execute("DELETE FROM users WHERE id = ?1", [id])? == 1)
    }

    pub fn list(conn: &Connection) -> Result<Vec<UserAccount>> {
        let mut stmt = conn.prepare(&format!(
            "SELECT {COLUMNS} FROM users ORDER BY created_at, id"
        ))?;
        let rows = stmt.query_map([], from_row)?;
        Ok(rows.collect::<rusqlite::Result<_>>()?)
    }
}

pub mod tokens {
    use super::*;

    #[derive(Clone, Debug, PartialEq, Eq)]
    pub struct TokenRow {
        pub id: TokenId,
        pub user_id: UserId,
        pub digest: String,
        pub created_at: Timestamp,
        pub expires_at: Timestamp,
    }

    fn from_row(row: &Row<'_>) -> rusqlite::Result<TokenRow> {
        Ok(TokenRow {
            id: row.get("id")?,
            user_id: row.get("user_id")?,
            digest: row.get("digest")?,
            created_at: ts(row, "created_at")?,
            expires_at: ts(row, "expires_at")?,
        })
    }

    pub fn insert(conn: &Connection, token: &TokenRow) -> Result<()> {
        conn.execute(
            "INSERT INTO auth_tokens (id, user_id, digest, created_at, expires_at) \
             VALUES (?1, ?2, ?3, ?4, ?5)",
            params![
                token.id,
                token.user_id,
                token.digest,
                token.created_at.as_micros(),
                token.expires_at.as_micros(),
            ],
        )?;
        Ok(())
    }

    pub fn find_by_digest(conn: &Connection, digest: &str) -> Result<Option<TokenRow>> {
        Ok(conn
            .query_row(
                "SELECT * FROM auth_tokens WHERE digest = ?1",
                [digest],
                from_row,
            )
            .optional()?)
    }

    pub fn delete(conn: &Connection, id: TokenId) -> Result<bool> {
        Ok(conn.execute("DELETE FROM auth_tokens WHERE id = ?1", [id])? == 1)
    }

    /// Revokes every token of `user` except `keep`.
    pub fn delete_for_user(
        conn: &Connection,
        user: UserId,
        keep: Option<TokenId>,
    ) -> Result<usize> {
        Ok(match keep {
            Some(keep) => conn.execute(
                "DELETE FROM auth_tokens WHERE user_id = ?1 AND id != ?2",
                params![user, keep],
            )?,
            None => conn.execute("DELETE FROM auth_tokens WHERE user_id = ?1", [user])?,
        })
    }

    pub fn list(conn: &Connection) -> Result<Vec<TokenRow>> {
        let mut stmt = conn.prepare("SELECT * FROM auth_tokens ORDER BY created_at, id")?;
        let rows = stmt.query_map([], from_row)?;
        Ok(rows.collect::<rusqlite::Result<_>>()?)
    }
}

pub mod datasets {
    use super::*;
    use crate::blobstore::BlobDigest;
    use std::collections::HashSet;

    pub fn insert(conn: &Connection, d: &Dataset) -> Result<()> {
        conn.execute(
            "INSERT INTO datasets (id, owner_id, name, description, visibility, created_at, updated_at) \
             VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7)",
            params![
                d.id,
                d.owner_id,
                d.name,
                d.description,
                d.visibility.as_str(),
                d.created_at.as_micros(),
                d.updated_at.as_micros(),
            ],
        )?;
        write_orgs_and_tags(conn, d)?;
        let mut stmt = conn.prepare(
            "INSERT INTO file_entries (dataset_id, position, path, blob_digest, size_bytes, content_type) \
             VALUES (?1, ?2, ?3, ?4, ?5, ?6)",
        )?;
        for (position, e) in d.entries.iter().enumerate() {
            stmt.execute(params![
                d.id,
                position as i64,
                e.path,
                e.blob_digest,
                e.size_bytes as i64,
                e.content_type,
            ])?;
        }
        Ok(())
    }

    fn write_orgs_and_tags(conn: &Connection, d: &Dataset) -> Result<()> {
        let mut orgs =
            conn.prepare("INSERT INTO dataset_orgs (dataset_id, org_id) VALUES (?1, ?2)")?;
        for org in &d.org_ids {
            orgs.execute(params![d.id, org])?;
        }
        let mut tags =
            conn.prepare("INSERT INTO dataset_tags (dataset_id, tag) VALUES (?1, ?2)")?;
        for tag in &d.tags {
            tags.execute(params![d.id, tag.as_str()])?;
        }
        Ok(())
    }

    /// Rewrites the mutable metadata columns, org bindings and tags. Entries
    /// are immutable after creation.
    pub fn update_metadata(conn: &Connection, d: &Dataset) -> Result<bool> {
        let n = conn.execute(
            "UPDATE datasets SET name = ?2, description = ?3, visibility = ?4, updated_at = ?5 \
             WHERE id = ?1",
            params![
                d.id,
                d.name,
                d.description,
                d.visibility.as_str(),
                d.updated_at.as_micros(),
            ],
        )?;
        if n == 0 {
            return Ok(false);
        }
        conn.execute("DELETE FROM dataset_orgs WHERE dataset_id = ?1", [d.id])?;
        conn.execute("DELETE FROM dataset_tags WHERE dataset_id = ?1", [d.id])?;
        write_orgs_and_tags(conn, d)?;
        Ok(true)
    }

    pub fn get(conn: &Connection, id: DatasetId) -> Result<Option<Dataset>> {
        let head = conn
            .query_row(
                "SELECT id, owner_id, name, description, visibility, created_at, updated_at \
                 FROM datasets WHERE id = ?1",
                [id],
                |row| {
                    let visibility: String = row.get("visibility")?;
                    Ok(Dataset {
                        id: row.get("id")?,
                        owner_id: row.get("owner_id")?,
                        name: row.get("name")?,
                        description: row.get("description")?,
                        visibility: visibility.parse().map_err(|e: crate::Error| {
                            rusqlite::Error::FromSqlConversionFailure(
                                4,
                                rusqlite::types::Type::Text,
                                Box::new(e),
                            )
                        })?,
                        org_ids: BTreeSet::new(),
                        tags: BTreeSet::new(),
                        created_at: ts(row, "created_at")?,
                        updated_at: ts(row, "updated_at")?,
                        entries: Vec::new(),
                    })
                },
            )
            .optional()?;
        let Some(mut d) = head else {
            return Ok(None);
        };
        d.org_ids = org_ids(conn, id)?;
        d.tags = tags(conn, id)?;
        d.entries = entries(conn, id)?;
        Ok(Some(d))
    }

    pub fn org_ids(conn: &Connection, id: DatasetId) -> Result<BTreeSet<OrgId>> {
        let mut stmt = conn.prepare("SELECT org_id FROM dataset_orgs WHERE dataset_id = ?1")?;
        let rows = stmt.query_map([id], |r| r.get(0))?;
        Ok(rows.collect::<rusqlite::Result<_>>()?)
    }

    pub fn tags(conn: &Connection, id: DatasetId) -> Result<BTreeSet<Tag>> {
        let mut stmt = conn.prepare("SELECT tag FROM dataset_tags WHERE dataset_id = ?1")?;
        let rows = stmt.query_map([id], |r| r.get::<_, String>(0))?;
        let mut out = BTreeSet::new();
        for raw in rows {
            out.insert(normalize_tag(&raw?)?);
        }
        Ok(out)
    }

    pub fn entries(conn: &Connection, id: DatasetId) -> Result<Vec<FileEntry>> {
        let mut stmt = conn.prepare(
            "SELECT path, blob_digest, size_bytes, content_type FROM file_entries \
             WHERE dataset_id = ?1 ORDER BY position",
        )?;
        let rows = stmt.query_map([id], |r| {
            Ok(FileEntry {
                path: r.get(0)?,
                blob_digest: r.get(1)?,
                size_bytes: r.get::<_, i64>(2)? as u64,
                content_type: r.get(3)?,
            })
        })?;
        Ok(rows.collect::<rusqlite::Result<_>>()?)
    }

    pub fn entry(conn: &Connection, id: DatasetId, path: &str) -> Result<Option<FileEntry>> {
        Ok(conn
            .query_row(
                "SELECT path, blob_digest, size_bytes, content_type FROM file_entries \
                 WHERE dataset_id = ?1 AND path = ?2",
                params![id, path],
                |r| {
                    Ok(FileEntry {
                        path: r.get(0)?,
                        blob_digest: r.get(1)?,
                        size_bytes: r.get::<_, i64>(2)? as u64,
                        content_type: r.get(3)?,
                    })
                },
            )
            .optional()?)
    }

    pub fn delete(conn: &Connection, id: DatasetId) -> Result<bool> {
        Ok(conn.execute("DELETE FROM datasets WHERE id = ?1", [id])? == 1)
    }

    pub fn ids_owned_by(conn: &Connection, owner: UserId) -> Result<Vec<DatasetId>> {
        let mut stmt = conn.prepare("SELECT id FROM datasets WHERE owner_id = ?1")?;
        let rows = stmt.query_map([owner], |r| r.get(0))?;
        Ok(rows.collect::<rusqlite::Result<_>>()?)
    }

    pub fn all_ids(conn: &Connection) -> Result<Vec<DatasetId>> {
        let mut stmt = conn.prepare("SELECT id FROM datasets ORDER BY created_at DESC, id ASC")?;
        let rows = stmt.query_map([], |r| r.get(0))?;
        Ok(rows.collect::<rusqlite::Result<_>>()?)
    }

    /// Datasets bound to `org` that would have no org left without it.
    pub fn solely_bound_to(conn: &Connection, org: OrgId) -> Result<Vec<DatasetId>> {
        let mut stmt = conn.prepare(
            "SELECT o.dataset_id FROM dataset_orgs o WHERE o.org_id = ?1 AND NOT EXISTS \
             (SELECT 1 FROM dataset_orgs x WHERE x.dataset_id = o.dataset_id AND x.org_id != ?1)",
        )?;
        let rows = stmt.query_map([org], |r| r.get(0))?;
        Ok(rows.collect::<rusqlite::Result<_>>()?)
    }

    pub fn referenced_digests(conn: &Connection) -> Result<HashSet<BlobDigest>> {
        let mut stmt = conn.prepare("SELECT DISTINCT blob_digest FROM file_entries")?;
        let rows = stmt.query_map([], |r| r.get(0))?;
        Ok(rows.collect::<rusqlite::Result<_>>()?)
    }

    pub fn is_digest_referenced(conn: &Connection, digest: &BlobDigest) -> Result<bool> {
        Ok(conn
            .query_row(
                "SELECT 1 FROM file_entries WHERE blob_digest = ?1 LIMIT 1",
                [digest],
                |_| Ok(()),
            )
            .optional()?
            .is_some())
    }
}

pub mod reviews {
    use super::*;

    const COLUMNS: &str = "id, dataset_id, author_id, rating, comment, created_at, updated_at";

    fn from_row(row: &Row<'_>) -> rusqlite::Result<Review> {
        let rating: i64 = row.get("rating")?;
        Ok(Review {
            id: row.get("id")?,
            dataset_id: row.get("dataset_id")?,
            author_id: row.get("author_id")?,
            rating: Rating::new(rating).map_err(|e| {
                rusqlite::Error::FromSqlConversionFailure(
                    3,
                    rusqlite::types::Type::Integer,
                    Box::new(e),
                )
            })?,
            comment: row.get("comment")?,
            created_at: ts(row, "created_at")?,
            updated_at: ts(row, "updated_at")?,
        })
    }

    pub fn insert(conn: &Connection, r: &Review) -> Result<()> {
        conn.execute(
            &format!("INSERT INTO reviews ({COLUMNS}) VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7)"),
            params![
                r.id,
                r.dataset_id,
                r.author_id,
                r.rating.get(),
                r.comment,
                r.created_at.as_micros(),
                r.updated_at.as_micros(),
            ],
        )?;
        Ok(())
    }

    pub fn get(conn: &Connection, id: ReviewId) -> Result<Option<Review>> {
        Ok(conn
            .query_row(
                &format!("SELECT {COLUMNS} FROM reviews WHERE id = ?1"),
                [id],
                from_row,
            )
            .optional()?)
    }

    pub fn find(conn: &Connection, dataset: DatasetId, author: UserId) -> Result<Option<Review>> {
        Ok(conn
            .query_row(
                &format!("SELECT {COLUMNS} FROM reviews WHERE dataset_id = ?1 AND author_id = ?2"),
                params![dataset, author],
                from_row,
            )
            .optional()?)
    }

    pub fn update(conn: &Connection, r: &Review) -> Result<bool> {
        Ok(conn.execute(
            "UPDATE reviews SET rating = ?2, comment = ?3, updated_at = ?4 WHERE id = ?1",
            params![r.id, r.rating.get(), r.comment, r.updated_at.as_micros()],
        )? == 1)
    }

    pub fn delete(conn: &Connection, id: ReviewId) -> Result<bool> {
        Ok(conn.execute("DELETE FROM reviews WHERE id = ?1", [id])? == 1)
    }

    pub fn delete_by_author(conn: &Connection, author: UserId) -> Result<usize> {
        Ok(conn.execute("DELETE FROM reviews WHERE author_id = ?1", [author])?)
    }

    /// Newest first.
    pub fn list_for_dataset(
        conn: &Connection,
        dataset: DatasetId,
        page: u32,
        page_size: u32,
    ) -> Result<Vec<Review>> {
        let (limit, offset) = limit_offset(page, page_size);
        let mut stmt = conn.prepare(&format!(
            "SELECT {COLUMNS} FROM reviews WHERE dataset_id = ?1 \
             ORDER BY created_at DESC, seq DESC LIMIT ?2 OFFSET ?3"
        ))?;
        let rows = stmt.query_map(params![dataset, limit, offset], from_row)?;
        Ok(rows.collect::<rusqlite::Result<_>>()?)
    }

    pub fn count_for_dataset(conn: &Connection, dataset: DatasetId) -> Result<u64> {
        let n: i64 = conn.query_row(
            "SELECT count(*) FROM reviews WHERE dataset_id = ?1",
            [dataset],
            |r| r.get(0),
        )?;
        Ok(n as u64)
    }

    pub fn ratings(conn: &Connection, dataset: DatasetId) -> Result<Vec<u8>> {
        let mut stmt = conn.prepare("SELECT rating FROM reviews WHERE dataset_id = ?1")?;
        let rows = stmt.query_map([dataset], |r| r.get(0))?;
        Ok(rows.collect::<rusqlite::Result<_>>()?)
    }
}

pub mod orgs {
    use super::*;

    fn from_row(row: &Row<'_>) -> rusqlite::Result<Organization> {
        Ok(Organization {
            id: row.get("id")?,
            name: row.get("name")?,
            description: row.get("description")?,
            creator_id: row.get("creator_id")?,
            created_at: ts(row, "created_at")?,
        })
    }

    pub fn insert(conn: &Connection, org: &Organization) -> Result<()> {
        conn.execute(
            "INSERT INTO organizations (id, name, name_key, description, creator_id, created_at) \
             VALUES (?1, ?2, ?3, ?4, ?5, ?6)",
            params![
                org.id,
                org.name,
                org.name.to_lowercase(),
                org.description,
                org.creator_id,
                org.created_at.as_micros(),
            ],
        )?;
        Ok(())
    }

    pub fn get(conn: &Connection, id: OrgId) -> Result<Option<Organization>> {
        Ok(conn
            .query_row(
                "SELECT id, name, description, creator_id, created_at FROM organizations WHERE id = ?1",
                [id],
                from_row,
            )
            .optional()?)
    }

    pub fn delete(conn: &Connection, id: OrgId) -> Result<bool> {
        Ok(conn.execute("DELETE FROM organizations WHERE id = ?1", [id])? == 1)
    }

    /// Oldest first.
    pub fn list(conn: &Connection, page: u32, page_size: u32) -> Result<Vec<Organization>> {
        let (limit, offset) = limit_offset(page, page_size);
        let mut stmt = conn.prepare(
            "SELECT id, name, description, creator_id, created_at FROM organizations \
             ORDER BY created_at, id LIMIT ?1 OFFSET ?2",
        )?;
        let rows = stmt.query_map(params![limit, offset], from_row)?;
        Ok(rows.collect::<rusqlite::Result<_>>()?)
    }

    pub fn count(conn: &Connection) -> Result<u64> {
        let n: i64 = conn.query_row("SELECT count(*) FROM organizations", [], |r| r.get(0))?;
        Ok(n as u64)
    }
}

pub mod memberships {
    use super::*;

    fn from_row(row: &Row<'_>) -> rusqlite::Result<Membership> {
        let role: String = row.get("role")?;
        Ok(Membership {
            org_id: row.get("org_id")?,
            user_id: row.get("user_id")?,
            role: Role::parse(&role).unwrap_or(Role::Member),
            joined_at: ts(row, "joined_at")?,
        })
    }

    pub fn insert(conn: &Connection, m: &Membership) -> Result<()> {
        conn.execute(
            "INSERT INTO memberships (org_id, user_id, role, joined_at) VALUES (?1, ?2, ?3, ?4)",
            params![
                m.org_id,
                m.user_id,
                m.role.as_str(),
                m.joined_at.as_micros()
            ],
        )?;
        Ok(())
    }

    pub fn get(conn: &Connection, org: OrgId, user: UserId) -> Result<Option<Membership>> {
        Ok(conn
            .query_row(
                "SELECT org_id, user_id, role, joined_at FROM memberships \
                 WHERE org_id = ?1 AND user_id = ?2",
                params![org, user],
                from_row,
            )
            .optional()?)
    }

    pub fn set_role(conn: &Connection, org: OrgId, user: UserId, role: Role) -> Result<bool> {
        Ok(conn.execute(
            "UPDATE memberships SET role = ?3 WHERE org_id = ?1 AND user_id = ?2",
            params![org, user, role.as_str()],
        )? == 1)
    }

    pub fn delete(conn: &Connection, org: OrgId, user: UserId) -> Result<bool> {
        Ok(conn.execute(
            "DELETE FROM memberships WHERE org_id = ?1 AND user_id = ?2",
            params![org, user],
        )? == 1)
    }

    /// Roster ordered by join time, oldest first.
    pub fn list(
        conn: &Connection,
        org: OrgId,
        page: u32,
        page_size: u32,
    ) -> Result<Vec<Membership>> {
        let (limit, offset) = limit_offset(page, page_size);
        let mut stmt = conn.prepare(
            "SELECT org_id, user_id, role, joined_at FROM memberships WHERE org_id = ?1 \
             ORDER BY joined_at, seq LIMIT ?2 OFFSET ?3",
        )?;
        let rows = stmt.query_map(params![org, limit, offset], from_row)?;
        Ok(rows.collect::<rusqlite::Result<_>>()?)
    }

    pub fn all_for_org(conn: &Connection, org: OrgId) -> Result<Vec<Membership>> {
        list(conn, org, 1, u32::MAX / 2)
    }

    pub fn for_user(conn: &Connection, user: UserId) -> Result<Vec<Membership>> {
        let mut stmt = conn.prepare(
            "SELECT org_id, user_id, role, joined_at FROM memberships WHERE user_id = ?1 ORDER BY seq",
        )?;
        let rows = stmt.query_map([user], from_row)?;
        Ok(rows.collect::<rusqlite::Result<_>>()?)
    }

    pub fn count(conn: &Connection, org: OrgId) -> Result<u64> {
        let n: i64 = conn.query_row(
            "SELECT count(*) FROM memberships WHERE org_id = ?1",
            [org],
            |r| r.get(0),
        )?;
        Ok(n as u64)
    }

    pub fn owner_count(conn: &Connection, org: OrgId) -> Result<u64> {
        let n: i64 = conn.query_row(
            "SELECT count(*) FROM memberships WHERE org_id = ?1 AND role = 'owner'",
            [org],
            |r| r.get(0),
        )?;
        Ok(n as u64)
    }
}

pub mod conversations {
    use super::*;

    fn from_row(row: &Row<'_>) -> rusqlite::Result<Conversation> {
        Ok(Conversation {
            id: row.get("id")?,
            participants: [row.get("user_low")?, row.get("user_high")?],
            created_at: ts(row, "created_at")?,
        })
    }

    pub fn insert(conn: &Connection, c: &Conversation) -> Result<()> {
        conn.execute(
            "INSERT INTO conversations (id, user_low, user_high, created_at) VALUES (?1, ?2, ?3, ?4)",
            params![c.id, c.participants[0], c.participants[1], c.created_at.as_micros()],
        )?;
        Ok(())
    }

    pub fn get(conn: &Connection, id: ConversationId) -> Result<Option<Conversation>> {
        Ok(conn
            .query_row(
                "SELECT id, user_low, user_high, created_at FROM conversations WHERE id = ?1",
                [id],
                from_row,
            )
            .optional()?)
    }

    pub fn find_by_pair(conn: &Connection, pair: [UserId; 2]) -> Result<Option<Conversation>> {
        Ok(conn
            .query_row(
                "SELECT id, user_low, user_high, created_at FROM conversations \
                 WHERE user_low = ?1 AND user_high = ?2",
                params![pair[0], pair[1]],
                from_row,
            )
            .optional()?)
    }

    pub fn count_for_user(conn: &Connection, user: UserId) -> Result<u64> {
        let n: i64 = conn.query_row(
            "SELECT count(*) FROM conversations WHERE user_low = ?1 OR user_high = ?1",
            [user],
            |r| r.get(0),
        )?;
        Ok(n as u64)
    }
}

pub mod messages {
    use super::*;

    const COLUMNS: &str = "seq, id, conversation_id, sender_id, body, sent_at";

    pub(crate) fn from_row(row: &Row<'_>) -> rusqlite::Result<(i64, Message)> {
        Ok((
            row.get("seq")?,
            Message {
                id: row.get("id")?,
                conversation_id: row.get("conversation_id")?,
                sender_id: row.get("sender_id")?,
                body: row.get("body")?,
                sent_at: ts(row, "sent_at")?,
            },
        ))
    }

    /// Appends a message and returns its position in the total order.
    pub fn insert(conn: &Connection, m: &Message) -> Result<i64> {
        conn.execute(
            "INSERT INTO messages (id, conversation_id, sender_id, body, sent_at) \
             VALUES (?1, ?2, ?3, ?4, ?5)",
            params![
                m.id,
                m.conversation_id,
                m.sender_id,
                m.body,
                m.sent_at.as_micros()
            ],
        )?;
        Ok(conn.last_insert_rowid())
    }

    /// Chronological, oldest first.
    pub fn list(
        conn: &Connection,
        conversation: ConversationId,
        page: u32,
        page_size: u32,
    ) -> Result<Vec<(i64, Message)>> {
        let (limit, offset) = limit_offset(page, page_size);
        let mut stmt = conn.prepare(&format!(
            "SELECT {COLUMNS} FROM messages WHERE conversation_id = ?1 ORDER BY seq LIMIT ?2 OFFSET ?3"
        ))?;
        let rows = stmt.query_map(params![conversation, limit, offset], from_row)?;
        Ok(rows.collect::<rusqlite::Result<_>>()?)
    }

    pub fn count(conn: &Connection, conversation: ConversationId) -> Result<u64> {
        let n: i64 = conn.query_row(
            "SELECT count(*) FROM messages WHERE conversation_id = ?1",
            [conversation],
            |r| r.get(0),
        )?;
        Ok(n as u64)
    }

    pub fn get(conn: &Connection, id: MessageId) -> Result<Option<Message>> {
        Ok(conn
            .query_row(
                &format!("SELECT {COLUMNS} FROM messages WHERE id = ?1"),
                [id],
                from_row,
            )
            .optional()?
            .map(|(_, m)| m))
    }

    pub fn last_seq(conn: &Connection, conversation: ConversationId) -> Result<i64> {
        Ok(conn.query_row(
            "SELECT coalesce(max(seq), 0) FROM messages WHERE conversation_id = ?1",
            [conversation],
            |r| r.get(0),
        )?)
    }

    pub fn set_read_marker(
        conn: &Connection,
        conversation: ConversationId,
        user: UserId,
        seq: i64,
    ) -> Result<()> {
        conn.execute(
            "INSERT INTO read_markers (conversation_id, user_id, last_read_seq) VALUES (?1, ?2, ?3) \
             ON CONFLICT (conversation_id, user_id) \
             DO UPDATE SET last_read_seq = max(last_read_seq, excluded.last_read_seq)",
            params![conversation, user, seq],
        )?;
        Ok(())
    }

    pub fn read_marker(
        conn: &Connection,
        conversation: ConversationId,
        user: UserId,
    ) -> Result<i64> {
        Ok(conn
            .query_row(
                "SELECT last_read_seq FROM read_markers WHERE conversation_id = ?1 AND user_id = ?2",
                params![conversation, user],
                |r| r.get(0),
            )
            .optional()?
            .unwrap_or(0))
    }
}

pub mod notifications {
    use super::*;

    const COLUMNS: &str = "id, recipient_id, kind, dataset_id, org_id, review_id, \
                           conversation_id, message_id, is_read, created_at";

    fn from_row(row: &Row<'_>) -> rusqlite::Result<Notification> {
        let kind: String = row.get("kind")?;
        let event = match kind.as_str() {
            "dataset_in_org" => NotificationEvent::DatasetInOrg {
                dataset_id: row.get("dataset_id")?,
                org_id: row.get("org_id")?,
            },
            "review_received" => NotificationEvent::ReviewReceived {
                dataset_id: row.get("dataset_id")?,
                review_id: row.get("review_id")?,
            },
            _ => NotificationEvent::MessageReceived {
                conversation_id: row.get("conversation_id")?,
                message_id: row.get("message_id")?,
            },
        };
        Ok(Notification {
            id: row.get("id")?,
            recipient_id: row.get("recipient_id")?,
            event,
            is_read: row.get("is_read")?,
            created_at: ts(row, "created_at")?,
        })
    }

    pub fn insert(conn: &Connection, n: &Notification) -> Result<()> {
        let (mut dataset, mut org, mut review, mut conversation, mut message) =
            (None, None, None, None, None);
        match &n.event {
            NotificationEvent::DatasetInOrg { dataset_id, org_id } => {
                dataset = Some(*dataset_id);
                org = Some(*org_id);
            }
            NotificationEvent::ReviewReceived {
                dataset_id,
                review_id,
            } => {
                dataset = Some(*dataset_id);
                review = Some(*review_id);
            }
            NotificationEvent::MessageReceived {
                conversation_id,
                message_id,
            } => {
                conversation = Some(*conversation_id);
                message = Some(*message_id);
            }
        }
        conn.execute(
            &format!("INSERT INTO notifications ({COLUMNS}) VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8, ?9, ?10)"),
            params![
                n.id,
                n.recipient_id,
                n.event.kind(),
                dataset,
                org,
                review,
                conversation,
                message,
                n.is_read,
                n.created_at.as_micros(),
            ],
        )?;
        Ok(())
    }

    pub fn get(conn: &Connection, id: NotificationId) -> Result<Option<Notification>> {
        Ok(conn
            .query_row(
                &format!("SELECT {COLUMNS} FROM notifications WHERE id = ?1"),
                [id],
                from_row,
            )
            .optional()?)
    }

    /// Newest first.
    pub fn list(
        conn: &Connection,
        recipient: UserId,
        unread_only: bool,
        page: u32,
        page_size: u32,
    ) -> Result<Vec<Notification>> {
        let (limit, offset) = limit_offset(page, page_size);
        let mut stmt = conn.prepare(&format!(
            "SELECT {COLUMNS} FROM notifications WHERE recipient_id = ?1 AND (?2 = 0 OR is_read = 0) \
             ORDER BY created_at DESC, seq DESC LIMIT ?3 OFFSET ?4"
        ))?;
        let rows = stmt.query_map(params![recipient, unread_only, limit, offset], from_row)?;
        Ok(rows.collect::<rusqlite::Result<_>>()?)
    }

    pub fn count(conn: &Connection, recipient: UserId, unread_only: bool) -> Result<u64> {
        let n: i64 = conn.query_row(
            "SELECT count(*) FROM notifications WHERE recipient_id = ?1 AND (?2 = 0 OR is_read = 0)",
            params![recipient, unread_only],
            |r| r.get(0),
        )?;
        Ok(n as u64)
    }

    pub fn mark_read(conn: &Connection, id: NotificationId) -> Result<bool> {
        Ok(conn.execute(
            "UPDATE notifications SET is_read = 1 WHERE id = ?1 AND is_read = 0",
            [id],
        )? == 1)
    }

    pub fn delete_for_recipient(conn: &Connection, recipient: UserId) -> Result<usize> {
        Ok(conn.execute(
            "DELETE FROM notifications WHERE recipient_id = ?1",
            [recipient],
        )?)
    }
}
