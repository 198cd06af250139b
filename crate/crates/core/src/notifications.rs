//! In-app inbox. Notifications are written after the source event commits.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::hub::{DataHub, Page, PageRequest};
use crate::model::*;
use crate::persistence::repo;

impl DataHub {
    fn emit(&self, recipients: &BTreeSet<UserId>, event: &NotificationEvent) -> Result<usize> {
        if recipients.is_empty() {
            return Ok(0);
        }
        let now = self.now();
        self.store.with_transaction(|tx| {
            for recipient in recipients {
                repo::notifications::insert(
                    tx,
                    &Notification {
                        id: NotificationId::new(),
                        recipient_id: *recipient,
                        event: event.clone(),
                        is_read: false,
                        created_at: now,
                    },
                )?;
            }
            Ok(recipients.len())
        })
    }

    /// Notifies every member of the dataset's orgs except the uploader, once
    /// per person even when orgs overlap. Returns the number emitted.
    pub fn emit_dataset_in_org(&self, dataset: &Dataset) -> Result<usize> {
        let mut total = 0;
        let mut notified = BTreeSet::from([dataset.owner_id]);
        for org in &dataset.org_ids {
            let members = self
                .store
                .read(|c| repo::memberships::all_for_org(c, *org))?;
            let fresh: BTreeSet<_> = members
                .into_iter()
                .map(|m| m.user_id)
                .filter(|u| !notified.contains(u))
                .collect();
            notified.extend(fresh.iter().copied());
            total += self.emit(
                &fresh,
                &NotificationEvent::DatasetInOrg {
                    dataset_id: dataset.id,
                    org_id: *org,
                },
            )?;
        }
        Ok(total)
    }

    pub fn emit_review_received(&self, review: &Review, owner: UserId) -> Result<usize> {
        self.emit(
            &BTreeSet::from([owner]),
            &NotificationEvent::ReviewReceived {
                dataset_id: review.dataset_id,
                review_id: review.id,
            },
        )
    }

    pub fn emit_message_received(&self, message: &Message, recipient: UserId) -> Result<usize> {
        self.emit(
            &BTreeSet::from([recipient]),
            &NotificationEvent::MessageReceived {
                conversation_id: message.conversation_id,
                message_id: message.id,
            },
        )
    }

    /// Newest first.
    pub fn list_notifications(
        &self,
        user: UserId,
        unread_only: bool,
        req: PageRequest,
    ) -> Result<Page<Notification>> {
        let req = PageRequest::new(req.page, req.page_size)?;
        self.store.read(|c| {
            let items = repo::notifications::list(c, user, unread_only, req.page, req.page_size)?;
            let total = repo::notifications::count(c, user, unread_only)?;
            Ok(Page::new(items, req, total))
        })
    }

    /// Marks the given notifications read and returns how many changed.
    /// Any id that is not the caller's fails the whole call.
    pub fn mark_read(&self, user: UserId, ids: &[NotificationId]) -> Result<usize> {
        self.store.with_transaction(|tx| {
            for id in ids {
                match repo::notifications::get(tx, *id)? {
                    Some(n) if n.recipient_id == user => {}
                    _ => return Err(Error::forbidden("notification belongs to another user")),
                }
            }
            let mut updated = 0;
            for id in ids.iter().collect::<BTreeSet<_>>() {
                updated += repo::notifications::mark_read(tx, *id)? as usize;
            }
            Ok(updated)
        })
    }
}
