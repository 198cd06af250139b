//! Organizations gate org-only datasets. Joining is open; every live org
//! keeps at least one Owner, and an org whose last member leaves is dissolved.

use rusqlite::Connection;
use serde::Serialize;

use crate::catalog::DatasetSummary;
use crate::error::{Error, Result};
use crate::hub::{DataHub, Page, PageRequest};
use crate::model::*;
use crate::persistence::repo;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MemberView {
    pub user_id: UserId,
    pub username: String,
    pub role: Role,
    pub joined_at: Timestamp,
}

/// What happened to the org when a member was removed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Departure {
    Left,
    /// The member was the last one; the org no longer exists.
    Dissolved,
}

/// Removes `user` from `org` inside `tx`.
///
/// A sole Owner may only leave as the last member unless `transfer_ownership`
/// is set, in which case the longest-standing remaining member is promoted.
pub(crate) fn remove_member(
    tx: &Connection,
    org: OrgId,
    user: UserId,
    transfer_ownership: bool,
) -> Result<Departure> {
    let membership =
        repo::memberships::get(tx, org, user)?.ok_or_else(|| Error::not_found("membership"))?;
    let members = repo::memberships::count(tx, org)?;
    if members == 1 {
        dissolve(tx, org)?;
        return Ok(Departure::Dissolved);
    }
    if membership.role == Role::Owner && repo::memberships::owner_count(tx, org)? == 1 {
        if !transfer_ownership {
            return Err(Error::forbidden(
                "the sole owner cannot leave while other members remain",
            ));
        }
        let heir = repo::memberships::all_for_org(tx, org)?
            .into_iter()
            .find(|m| m.user_id != user)
            .expect("another member exists");
        repo::memberships::set_role(tx, org, heir.user_id, Role::Owner)?;
    }
    repo::memberships::delete(tx, org, user)?;
    Ok(Departure::Left)
}

/// Deletes the org. Datasets bound only to it fall back to Private so they
/// stay visible to their owners alone; others just lose the binding.
fn dissolve(tx: &Connection, org: OrgId) -> Result<()> {
    for id in repo::datasets::solely_bound_to(tx, org)? {
        if let Some(mut dataset) = repo::datasets::get(tx, id)? {
            dataset.visibility = Visibility::Private;
            dataset.org_ids.clear();
            repo::datasets::update_metadata(tx, &dataset)?;
        }
    }
    repo::orgs::delete(tx, org)?;
    tracing::info!(%org, "dissolved organization");
    Ok(())
}

fn require_member(conn: &Connection, org: OrgId, user: UserId) -> Result<Membership> {
    if repo::orgs::get(conn, org)?.is_none() {
        return Err(Error::not_found("organization"));
    }
    repo::memberships::get(conn, org, user)?.ok_or_else(|| Error::forbidden("members only"))
}

impl DataHub {
    pub fn create_org(
        &self,
        creator: UserId,
        name: &str,
        description: &str,
    ) -> Result<Organization> {
        let name = name.trim();
        check_len("name", name, 1, MAX_ORG_NAME)?;
        check_len("description", description, 0, MAX_DESCRIPTION)?;
        let now = self.now();
        let org = Organization {
            id: OrgId::new(),
            name: name.to_owned(),
            description: description.to_owned(),
            creator_id: creator,
            created_at: now,
        };
        self.store
            .with_transaction(|tx| {
                repo::orgs::insert(tx, &org)?;
                repo::memberships::insert(
                    tx,
                    &Membership {
                        org_id: org.id,
                        user_id: creator,
                        role: Role::Owner,
                        joined_at: now,
                    },
                )
            })
            .map_err(|e| {
                if e.is_unique_violation() {
                    Error::conflict(format!("organization {name:?} already exists"))
                } else {
                    e
                }
            })?;
        tracing::info!(org = %org.id, "created organization");
        Ok(org)
    }

    pub fn get_org(&self, id: OrgId) -> Result<Organization> {
        self.store
            .read(|c| repo::orgs::get(c, id))?
            .ok_or_else(|| Error::not_found("organization"))
    }

    pub fn list_orgs(&self, req: PageRequest) -> Result<Page<Organization>> {
        let req = PageRequest::new(req.page, req.page_size)?;
        self.store.read(|c| {
            let items = repo::orgs::list(c, req.page, req.page_size)?;
            Ok(Page::new(items, req, repo::orgs::count(c)?))
        })
    }

    pub fn join_org(&self, user: UserId, org: OrgId) -> Result<Membership> {
        let membership = Membership {
            org_id: org,
            user_id: user,
            role: Role::Member,
            joined_at: self.now(),
        };
        self.store
            .with_transaction(|tx| {
                if repo::orgs::get(tx, org)?.is_none() {
                    return Err(Error::not_found("organization"));
                }
                repo::memberships::insert(tx, &membership)
            })
            .map_err(|e| {
                if e.is_unique_violation() {
                    Error::conflict("already a member")
                } else {
                    e
                }
            })?;
        Ok(membership)
    }

    pub fn leave_org(&self, user: UserId, org: OrgId) -> Result<Departure> {
        self.store.with_transaction(|tx| {
            if repo::orgs::get(tx, org)?.is_none() {
                return Err(Error::not_found("organization"));
            }
            remove_member(tx, org, user, false)
        })
    }

    /// Roster, oldest membership first. Members only.
    pub fn list_members(
        &self,
        viewer: UserId,
        org: OrgId,
        req: PageRequest,
    ) -> Result<Page<MemberView>> {
        let req = PageRequest::new(req.page, req.page_size)?;
        self.store.read(|c| {
            require_member(c, org, viewer)?;
            let mut items = Vec::new();
            for m in repo::memberships::list(c, org, req.page, req.page_size)? {
                let user =
                    repo::users::get(c, m.user_id)?.ok_or_else(|| Error::not_found("user"))?;
                items.push(MemberView {
                    user_id: m.user_id,
                    username: user.username,
                    role: m.role,
                    joined_at: m.joined_at,
                });
            }
            Ok(Page::new(items, req, repo::memberships::count(c, org)?))
        })
    }

    /// Datasets bound to the org that the viewer can see, newest first.
    pub fn list_org_datasets(
        &self,
        viewer: UserId,
        org: OrgId,
        req: PageRequest,
    ) -> Result<Page<DatasetSummary>> {
        let req = PageRequest::new(req.page, req.page_size)?;
        self.store.read(|c| {
            require_member(c, org, viewer)?;
            self.org_dataset_summaries(c, viewer, org, req)
        })
    }
}
