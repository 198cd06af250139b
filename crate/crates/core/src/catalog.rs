//! Dataset lifecycle, visibility, search and downloads.

use std::collections::{BTreeSet, HashSet};
use std::io::{self, Read, Write};

use rusqlite::types::Value;
use rusqlite::{params_from_iter, Connection};
use serde::{Deserialize, Serialize};

use crate::blobstore::{BlobPin, BlobReader};
use crate::error::{Error, Result};
use crate::hub::{DataHub, Page, PageRequest};
use crate::model::*;
use crate::persistence::repo;
use crate::reviews::RatingSummary;

/// Whether `viewer` may see `dataset`, given the orgs the viewer belongs to.
///
/// Public needs an authenticated viewer (or anonymous reads enabled), org
/// visibility needs ownership or membership in a bound org, private is owner-only.
pub fn can_view(
    viewer: Option<UserId>,
    viewer_orgs: &HashSet<OrgId>,
    dataset: &Dataset,
    allow_anon_read: bool,
) -> bool {
    let Some(viewer) = viewer else {
        return allow_anon_read && dataset.visibility == Visibility::Public;
    };
    if viewer == dataset.owner_id {
        return true;
    }
    match dataset.visibility {
        Visibility::Public => true,
        Visibility::OrgOnly => dataset.org_ids.iter().any(|o| viewer_orgs.contains(o)),
        Visibility::Private => false,
    }
}

/// Dataset metadata as submitted by the uploader, before validation.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub visibility: Option<Visibility>,
    #[serde(default)]
    pub org_ids: BTreeSet<OrgId>,
    #[serde(default)]
    pub tags: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct ValidMeta {
    name: String,
    description: String,
    visibility: Visibility,
    org_ids: BTreeSet<OrgId>,
    tags: BTreeSet<Tag>,
}

impl DatasetMeta {
    fn validate(&self) -> Result<ValidMeta> {
        let name = self.name.trim().to_owned();
        check_len("name", &name, 1, MAX_DATASET_NAME)?;
        check_len("description", &self.description, 0, MAX_DESCRIPTION)?;
        let visibility = self
            .visibility
            .ok_or_else(|| Error::validation("visibility", "visibility is required"))?;
        check_visibility(visibility, &self.org_ids)?;
        Ok(ValidMeta {
            name,
            description: self.description.clone(),
            visibility,
            org_ids: self.org_ids.clone(),
            tags: normalize_tags(&self.tags)?,
        })
    }
}

pub struct DraftFile {
    pub path: String,
    pub content_type: Option<String>,
    pub content: Box<dyn Read + Send>,
}

impl DraftFile {
    pub fn bytes(path: &str, bytes: impl Into<Vec<u8>>) -> Self {
        DraftFile {
            path: path.to_owned(),
            content_type: None,
            content: Box::new(io::Cursor::new(bytes.into())),
        }
    }
}

pub struct DatasetDraft {
    pub meta: DatasetMeta,
    pub files: Vec<DraftFile>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Deserialize)]
pub struct MetadataChanges {
    pub name: Option<String>,
    pub description: Option<String>,
    pub tags: Option<Vec<String>>,
    pub visibility: Option<Visibility>,
    pub org_ids: Option<BTreeSet<OrgId>>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SearchQuery {
    pub name: Option<String>,
    pub file_type: Option<String>,
    pub tags: Vec<String>,
    pub author: Option<String>,
    pub page: PageRequest,
}

/// Lowercases and strips a leading dot; extensions are `[a-z0-9_+-]{1,32}`.
pub fn normalize_extension(raw: &str) -> Result<String> {
    let ext = raw.trim().trim_start_matches('.').to_lowercase();
    let ok = !ext.is_empty()
        && ext.len() <= 32
        && ext
            .chars()
            .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || matches!(c, '_' | '-' | '+'));
    if ok {
        Ok(ext)
    } else {
        Err(Error::validation(
            "file_type",
            format!("invalid extension {raw:?}"),
        ))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub id: DatasetId,
    pub name: String,
    pub owner_username: String,
    pub tags: BTreeSet<Tag>,
    pub visibility: Visibility,
    pub file_count: u64,
    pub total_size_bytes: u64,
    pub average_rating: Option<f64>,
    pub review_count: u64,
    pub created_at: Timestamp,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetDetail {
    pub dataset: Dataset,
    pub owner_username: String,
    pub rating: RatingSummary,
}

/// What a ZIP download will contain, resolved while checking access.
#[derive(Clone, Debug)]
pub struct ArchivePlan {
    pub dataset_name: String,
    pub modified: Timestamp,
    pub entries: Vec<FileEntry>,
}

/// An in-progress upload. Files are streamed into the blob store as they
/// arrive and stay pinned; `finish` commits the dataset. Dropping the session
/// without finishing removes blobs that nothing else uses.
pub struct UploadSession<'a> {
    hub: &'a DataHub,
    owner: UserId,
    files: Vec<(FileEntry, BlobPin)>,
    paths: HashSet<String>,
}

impl<'a> UploadSession<'a> {
    pub fn owner(&self) -> UserId {
        self.owner
    }

    pub fn file_count(&self) -> usize {
        self.files.len()
    }

    /// Validates `path` and streams `content` into the blob store.
    pub fn add_file(
        &mut self,
        path: &str,
        content_type: Option<&str>,
        content: impl Read,
    ) -> Result<&FileEntry> {
        let path = validate_path(path)?;
        if self.paths.contains(&path) {
            return Err(Error::validation(
                "path",
                format!("duplicate path {path:?}"),
            ));
        }
        let content_type = normalize_content_type(content_type)?;
        let pin = self.hub.blobs.put_pinned(content)?;
        let entry = FileEntry {
            path: path.clone(),
            blob_digest: pin.digest().clone(),
            size_bytes: pin.stat().size_bytes,
            content_type,
        };
        self.paths.insert(path);
        self.files.push((entry, pin));
        Ok(&self.files.last().expect("just pushed").0)
    }

    /// Validates the metadata and commits the dataset with all added files.
    pub fn finish(mut self, meta: &DatasetMeta) -> Result<Dataset> {
        let meta = meta.validate()?;
        if self.files.is_empty() {
            return Err(Error::validation(
                "files",
                "a dataset needs at least one file",
            ));
        }
        let now = self.hub.now();
        let dataset = Dataset {
            id: DatasetId::new(),
            owner_id: self.owner,
            name: meta.name,
            description: meta.description,
            visibility: meta.visibility,
            org_ids: meta.org_ids,
            tags: meta.tags,
            created_at: now,
            updated_at: now,
            entries: self.files.iter().map(|(e, _)| e.clone()).collect(),
        };
        dataset.validate()?;
        self.hub.store.with_transaction(|tx| {
            require_memberships(tx, self.owner, &dataset.org_ids)?;
            repo::datasets::insert(tx, &dataset)
        })?;
        // Committed: the pins may go.
        self.files.clear();
        tracing::info!(dataset = %dataset.id, owner = %dataset.owner_id, files = dataset.entries.len(), "created dataset");
        if !dataset.org_ids.is_empty() {
            if let Err(err) = self.hub.emit_dataset_in_org(&dataset) {
                tracing::warn!(dataset = %dataset.id, %err, "failed to emit upload notifications");
            }
        }
        Ok(dataset)
    }
}

impl Drop for UploadSession<'_> {
    fn drop(&mut self) {
        for (_, pin) in self.files.drain(..) {
            let hub = self.hub;
            let result = pin.discard(|digest| {
                hub.store
                    .read(|c| repo::datasets::is_digest_referenced(c, digest))
                    .unwrap_or(true)
            });
            if let Err(err) = result {
                tracing::warn!(%err, "failed to discard abandoned upload blob");
            }
        }
    }
}

fn normalize_content_type(raw: Option<&str>) -> Result<String> {
    match raw.map(str::trim) {
        None | Some("") => Ok(DEFAULT_CONTENT_TYPE.to_owned()),
        Some(ct) => {
            let valid = ct.len() <= 255
                && ct
                    .split_once('/')
                    .is_some_and(|(a, b)| !a.is_empty() && !b.is_empty())
                && ct.chars().all(|c| c.is_ascii_graphic() || c == ' ');
            if valid {
                Ok(ct.to_owned())
            } else {
                Err(Error::validation(
                    "content_type",
                    format!("invalid MIME type {ct:?}"),
                ))
            }
        }
    }
}

fn require_memberships(conn: &Connection, user: UserId, orgs: &BTreeSet<OrgId>) -> Result<()> {
    for org in orgs {
        if repo::memberships::get(conn, *org, user)?.is_none() {
            return Err(Error::forbidden(format!(
                "not a member of organization {org}"
            )));
        }
    }
    Ok(())
}

fn viewer_orgs(conn: &Connection, viewer: Option<UserId>) -> Result<HashSet<OrgId>> {
    match viewer {
        Some(user) => Ok(repo::memberships::for_user(conn, user)?
            .into_iter()
            .map(|m| m.org_id)
            .collect()),
        None => Ok(HashSet::new()),
    }
}

/// Filters shared by search and org listings.
#[derive(Default)]
struct SummaryFilter {
    name: Option<String>,
    file_type: Option<String>,
    tags: BTreeSet<Tag>,
    author: Option<String>,
    org: Option<OrgId>,
}

impl DataHub {
    /// Loads the dataset if `viewer` may see it; NotFound otherwise.
    pub(crate) fn visible_dataset_in(
        &self,
        conn: &Connection,
        viewer: Option<UserId>,
        id: DatasetId,
    ) -> Result<Dataset> {
        let dataset = repo::datasets::get(conn, id)?.ok_or_else(|| Error::not_found("dataset"))?;
        let orgs = viewer_orgs(conn, viewer)?;
        if can_view(viewer, &orgs, &dataset, self.config.allow_anon_read) {
            Ok(dataset)
        } else {
            Err(Error::not_found("dataset"))
        }
    }

    pub fn can_view(&self, viewer: Option<UserId>, dataset: &Dataset) -> Result<bool> {
        let orgs = self.store.read(|c| viewer_orgs(c, viewer))?;
        Ok(can_view(
            viewer,
            &orgs,
            dataset,
            self.config.allow_anon_read,
        ))
    }

    pub fn begin_upload(&self, owner: UserId) -> UploadSession<'_> {
        UploadSession {
            hub: self,
            owner,
            files: Vec::new(),
            paths: HashSet::new(),
        }
    }

    pub fn create_dataset(&self, owner: UserId, draft: DatasetDraft) -> Result<Dataset> {
        // Reject bad metadata, paths and org bindings before any bytes are stored.
        let meta = draft.meta.validate()?;
        if draft.files.is_empty() {
            return Err(Error::validation(
                "files",
                "a dataset needs at least one file",
            ));
        }
        let mut seen = HashSet::new();
        for file in &draft.files {
            let path = validate_path(&file.path)?;
            if !seen.insert(path) {
                return Err(Error::validation(
                    "path",
                    format!("duplicate path {:?}", file.path),
                ));
            }
        }
        self.store
            .read(|c| require_memberships(c, owner, &meta.org_ids))?;

        let mut session = self.begin_upload(owner);
        for file in draft.files {
            session.add_file(&file.path, file.content_type.as_deref(), file.content)?;
        }
        session.finish(&draft.meta)
    }

    pub fn get_dataset(&self, viewer: Option<UserId>, id: DatasetId) -> Result<DatasetDetail> {
        self.store.read(|c| {
            let dataset = self.visible_dataset_in(c, viewer, id)?;
            let owner = repo::users::get(c, dataset.owner_id)?
                .ok_or_else(|| Error::not_found("dataset"))?;
            let rating = RatingSummary::from_ratings(repo::reviews::ratings(c, id)?);
            Ok(DatasetDetail {
                dataset,
                owner_username: owner.username,
                rating,
            })
        })
    }

    pub fn update_metadata(
        &self,
        caller: UserId,
        id: DatasetId,
        changes: MetadataChanges,
    ) -> Result<Dataset> {
        let now = self.now();
        self.store.with_transaction(|tx| {
            let mut dataset = self.visible_dataset_in(tx, Some(caller), id)?;
            if dataset.owner_id != caller {
                return Err(Error::forbidden("only the owner may edit a dataset"));
            }
            if let Some(name) = changes.name.as_deref() {
                let name = name.trim();
                check_len("name", name, 1, MAX_DATASET_NAME)?;
                dataset.name = name.to_owned();
            }
            if let Some(description) = &changes.description {
                check_len("description", description, 0, MAX_DESCRIPTION)?;
                dataset.description = description.clone();
            }
            if let Some(tags) = &changes.tags {
                dataset.tags = normalize_tags(tags)?;
            }
            let binding_changed = changes.visibility.is_some() || changes.org_ids.is_some();
            let visibility = changes.visibility.unwrap_or(dataset.visibility);
            let org_ids = match (&changes.org_ids, visibility) {
                (Some(orgs), _) => orgs.clone(),
                (None, Visibility::OrgOnly) if dataset.visibility == Visibility::OrgOnly => {
                    dataset.org_ids.clone()
                }
                (None, _) => BTreeSet::new(),
            };
            check_visibility(visibility, &org_ids)?;
            if binding_changed {
                require_memberships(tx, caller, &org_ids)?;
            }
            dataset.visibility = visibility;
            dataset.org_ids = org_ids;
            dataset.updated_at = now.max(dataset.updated_at);
            repo::datasets::update_metadata(tx, &dataset)?;
            Ok(dataset)
        })
    }

    /// Deletes a dataset; its blobs become eligible for collection.
    pub fn delete_dataset(&self, caller: &UserAccount, id: DatasetId) -> Result<()> {
        self.store.with_transaction(|tx| {
            let dataset = if caller.is_admin {
                repo::datasets::get(tx, id)?.ok_or_else(|| Error::not_found("dataset"))?
            } else {
                self.visible_dataset_in(tx, Some(caller.id), id)?
            };
            if dataset.owner_id != caller.id && !caller.is_admin {
                return Err(Error::forbidden("only the owner may delete a dataset"));
            }
            repo::datasets::delete(tx, id)?;
            Ok(())
        })?;
        tracing::info!(dataset = %id, "deleted dataset");
        Ok(())
    }

    pub fn search(
        &self,
        viewer: Option<UserId>,
        query: &SearchQuery,
    ) -> Result<Page<DatasetSummary>> {
        let filter = SummaryFilter {
            name: query
                .name
                .as_deref()
                .map(str::trim)
                .filter(|n| !n.is_empty())
                .map(str::to_lowercase),
            file_type: query
                .file_type
                .as_deref()
                .map(normalize_extension)
                .transpose()?,
            tags: normalize_tags(&query.tags)?,
            author: query.author.as_deref().map(|a| a.trim().to_lowercase()),
            org: None,
        };
        let req = PageRequest::new(query.page.page, query.page.page_size)?;
        self.store.read(|c| self.summaries(c, viewer, &filter, req))
    }

    pub(crate) fn org_dataset_summaries(
        &self,
        conn: &Connection,
        viewer: UserId,
        org: OrgId,
        req: PageRequest,
    ) -> Result<Page<DatasetSummary>> {
        let filter = SummaryFilter {
            org: Some(org),
            ..Default::default()
        };
        self.summaries(conn, Some(viewer), &filter, req)
    }

    fn summaries(
        &self,
        conn: &Connection,
        viewer: Option<UserId>,
        filter: &SummaryFilter,
        req: PageRequest,
    ) -> Result<Page<DatasetSummary>> {
        let mut clauses = Vec::new();
        let mut args: Vec<Value> = Vec::new();
        let viewer_value = viewer.map_or(Value::Null, |v| Value::Text(v.to_string()));

        args.push(viewer_value);
        args.push(Value::Integer(self.config.allow_anon_read as i64));
        clauses.push(
            "(d.owner_id = ?1 \
              OR (d.visibility = 'public' AND (?1 IS NOT NULL OR ?2 = 1)) \
              OR (d.visibility = 'org' AND EXISTS ( \
                  SELECT 1 FROM dataset_orgs o JOIN memberships m ON m.org_id = o.org_id \
                  WHERE o.dataset_id = d.id AND m.user_id = ?1)))"
                .to_owned(),
        );
        if let Some(name) = &filter.name {
            args.push(Value::Text(name.clone()));
            clauses.push(format!("instr(casefold(d.name), ?{}) > 0", args.len()));
        }
        if let Some(ext) = &filter.file_type {
            args.push(Value::Text(format!(".{ext}")));
            let n = args.len();
            clauses.push(format!(
                "EXISTS (SELECT 1 FROM file_entries e WHERE e.dataset_id = d.id \
                 AND substr(casefold(e.path), -length(?{n})) = ?{n})"
            ));
        }
        for tag in &filter.tags {
            args.push(Value::Text(tag.as_str().to_owned()));
            clauses.push(format!(
                "EXISTS (SELECT 1 FROM dataset_tags t WHERE t.dataset_id = d.id AND t.tag = ?{})",
                args.len()
            ));
        }
        if let Some(author) = &filter.author {
            args.push(Value::Text(author.clone()));
            clauses.push(format!("u.username = ?{}", args.len()));
        }
        if let Some(org) = filter.org {
            args.push(Value::Text(org.to_string()));
            clauses.push(format!(
                "EXISTS (SELECT 1 FROM dataset_orgs x WHERE x.dataset_id = d.id AND x.org_id = ?{})",
                args.len()
            ));
        }
        let where_sql = clauses.join(" AND ");

        let total: i64 = conn.query_row(
            &format!(
                "SELECT count(*) FROM datasets d JOIN users u ON u.id = d.owner_id WHERE {where_sql}"
            ),
            params_from_iter(args.iter()),
            |r| r.get(0),
        )?;

        let (limit, offset) = repo::limit_offset(req.page, req.page_size);
        let limit_idx = args.len() + 1;
        args.push(Value::Integer(limit));
        args.push(Value::Integer(offset));
        let sql = format!(
            "SELECT d.id, d.name, u.username, d.visibility, d.created_at, \
               (SELECT count(*) FROM file_entries e WHERE e.dataset_id = d.id), \
               (SELECT coalesce(sum(e.size_bytes), 0) FROM file_entries e WHERE e.dataset_id = d.id), \
               (SELECT count(*) FROM reviews r WHERE r.dataset_id = d.id), \
               (SELECT coalesce(sum(r.rating), 0) FROM reviews r WHERE r.dataset_id = d.id) \
             FROM datasets d JOIN users u ON u.id = d.owner_id \
             WHERE {where_sql} \
             ORDER BY d.created_at DESC, d.id ASC \
             LIMIT ?{limit_idx} OFFSET ?{}",
            limit_idx + 1
        );
        let mut stmt = conn.prepare(&sql)?;
        let rows = stmt.query_map(params_from_iter(args.iter()), |r| {
            Ok((
                r.get::<_, DatasetId>(0)?,
                r.get::<_, String>(1)?,
                r.get::<_, String>(2)?,
                r.get::<_, String>(3)?,
                r.get::<_, i64>(4)?,
                r.get::<_, i64>(5)?,
                r.get::<_, i64>(6)?,
                r.get::<_, i64>(7)?,
                r.get::<_, i64>(8)?,
            ))
        })?;
        let mut items = Vec::new();
        for row in rows {
            let (id, name, owner, vis, created, files, size, reviews, rating_sum) = row?;
            let rating = RatingSummary::from_sum(rating_sum as u64, reviews as u64);
            items.push(DatasetSummary {
                id,
                name,
                owner_username: owner,
                tags: repo::datasets::tags(conn, id)?,
                visibility: vis.parse()?,
                file_count: files as u64,
                total_size_bytes: size as u64,
                average_rating: rating.average(),
                review_count: rating.count(),
                created_at: Timestamp::from_micros(created),
            });
        }
        Ok(Page::new(items, req, total as u64))
    }

    /// Resolves the entries of a viewable dataset for archive streaming.
    pub fn archive_plan(&self, viewer: Option<UserId>, id: DatasetId) -> Result<ArchivePlan> {
        let dataset = self
            .store
            .read(|c| self.visible_dataset_in(c, viewer, id))?;
        Ok(ArchivePlan {
            dataset_name: dataset.name,
            modified: dataset.updated_at,
            entries: dataset.entries,
        })
    }

    /// Writes a deflate ZIP of `plan` to `out` without seeking, so `out` can
    /// be a network stream.
    pub fn write_archive<W: Write>(&self, plan: &ArchivePlan, out: W) -> Result<W> {
        use zip::write::SimpleFileOptions;

        let mut zip = zip::ZipWriter::new_stream(out);
        let modified = zip_time(plan.modified);
        for entry in &plan.entries {
            let options = SimpleFileOptions::default()
                .compression_method(zip::CompressionMethod::Deflated)
                .large_file(entry.size_bytes >= u32::MAX as u64)
                .last_modified_time(modified);
            zip.start_file(entry.path.as_str(), options)
                .map_err(zip_err)?;
            let mut blob = self.blobs.get_blob(&entry.blob_digest)?;
            io::copy(&mut blob, &mut zip)?;
        }
        let stream = zip.finish().map_err(zip_err)?;
        Ok(stream.into_inner())
    }

    pub fn download_archive<W: Write>(
        &self,
        viewer: Option<UserId>,
        id: DatasetId,
        out: W,
    ) -> Result<W> {
        let plan = self.archive_plan(viewer, id)?;
        self.write_archive(&plan, out)
    }

    pub fn download_file(
        &self,
        viewer: Option<UserId>,
        id: DatasetId,
        path: &str,
    ) -> Result<(FileEntry, BlobReader)> {
        let entry = self.store.read(|c| {
            self.visible_dataset_in(c, viewer, id)?;
            repo::datasets::entry(c, id, path)?.ok_or_else(|| Error::not_found("file"))
        })?;
        let reader = self.blobs.get_blob(&entry.blob_digest)?;
        Ok((entry, reader))
    }

    /// Deletes blobs no file entry references.
    pub fn collect_garbage(&self) -> Result<usize> {
        let session = self.blobs.begin_gc();
        let referenced = self.store.read(repo::datasets::referenced_digests)?;
        session.sweep(&referenced)
    }
}

fn zip_time(ts: Timestamp) -> zip::DateTime {
    use chrono::{Datelike, Timelike};
    let dt = ts.to_datetime();
    zip::DateTime::from_date_and_time(
        dt.year().clamp(1980, 2107) as u16,
        dt.month() as u8,
        dt.day() as u8,
        dt.hour() as u8,
        dt.minute() as u8,
        dt.second() as u8,
    )
    .unwrap_or_default()
}

fn zip_err(err: zip::result::ZipError) -> Error {
    match err {
        zip::result::ZipError::Io(e) => e.into(),
        other => Error::Io(io::Error::other(other)),
    }
}
