//! One-to-one conversations. Each unordered pair of users has at most one
//! conversation; read state is a per-participant marker on the message order.

use rusqlite::{params, Connection, OptionalExtension};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hub::{DataHub, Page, PageRequest};
use crate::model::*;
use crate::persistence::repo;

/// Shown as the sender of messages whose author deleted their account.
pub const DELETED_USER: &str = "deleted user";

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ConversationView {
    pub conversation: Conversation,
    pub other_user_id: UserId,
    pub other_username: String,
    pub last_message: Option<Message>,
    pub unread_count: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MessageView {
    #[serde(flatten)]
    pub message: Message,
    pub sender_username: String,
}

fn display_username(conn: &Connection, id: UserId) -> Result<String> {
    Ok(match repo::users::get(conn, id)? {
        Some(u) if !u.is_deleted() => u.username,
        _ => DELETED_USER.to_owned(),
    })
}

fn participant_conversation(
    conn: &Connection,
    id: ConversationId,
    user: UserId,
) -> Result<Conversation> {
    let conversation =
        repo::conversations::get(conn, id)?.ok_or_else(|| Error::not_found("conversation"))?;
    if !conversation.includes(user) {
        return Err(Error::forbidden("not a participant in this conversation"));
    }
    Ok(conversation)
}

impl DataHub {
    /// Returns the pair's conversation, creating it on first contact.
    pub fn start_conversation(&self, initiator: UserId, other: UserId) -> Result<Conversation> {
        let pair = Conversation::pair(initiator, other)?;
        let now = self.now();
        let attempt = || {
            self.store.with_transaction(|tx| {
                match repo::users::get(tx, other)? {
                    Some(u) if !u.is_deleted() => {}
                    _ => return Err(Error::not_found("user")),
                }
                if let Some(existing) = repo::conversations::find_by_pair(tx, pair)? {
                    return Ok(existing);
                }
                let conversation = Conversation {
                    id: ConversationId::new(),
                    participants: pair,
                    created_at: now,
                };
                repo::conversations::insert(tx, &conversation)?;
                Ok(conversation)
            })
        };
        match attempt() {
            // A concurrent start won the insert; the retry finds its row.
            Err(e) if e.is_unique_violation() => attempt(),
            other => other,
        }
    }

    pub fn send_message(
        &self,
        sender: UserId,
        conversation: ConversationId,
        body: &str,
    ) -> Result<Message> {
        validate_message_body(body)?;
        let message = Message {
            id: MessageId::new(),
            conversation_id: conversation,
            sender_id: sender,
            body: body.to_owned(),
            sent_at: self.now(),
        };
        let conv = self.store.with_transaction(|tx| {
            let conv = participant_conversation(tx, conversation, sender)?;
            repo::messages::insert(tx, &message)?;
            Ok::<_, Error>(conv)
        })?;
        if let Err(err) = self.emit_message_received(&message, conv.other(sender)) {
            tracing::warn!(message = %message.id, %err, "failed to emit message notification");
        }
        Ok(message)
    }

    /// Conversations with the most recent activity first: by latest message
    /// time, falling back to creation time for conversations without messages.
    pub fn list_conversations(
        &self,
        user: UserId,
        req: PageRequest,
    ) -> Result<Page<ConversationView>> {
        let req = PageRequest::new(req.page, req.page_size)?;
        self.store.read(|c| {
            let (limit, offset) = repo::limit_offset(req.page, req.page_size);
            let mut stmt = c.prepare(
                "SELECT c.id, \
                   coalesce((SELECT max(m.sent_at) FROM messages m WHERE m.conversation_id = c.id), \
                            c.created_at) AS activity, \
                   coalesce((SELECT max(m.seq) FROM messages m WHERE m.conversation_id = c.id), 0) AS last \
                 FROM conversations c WHERE c.user_low = ?1 OR c.user_high = ?1 \
                 ORDER BY activity DESC, last DESC, c.seq DESC LIMIT ?2 OFFSET ?3",
            )?;
            let ids = stmt
                .query_map(params![user, limit, offset], |r| r.get::<_, ConversationId>(0))?
                .collect::<rusqlite::Result<Vec<_>>>()?;
            let mut items = Vec::with_capacity(ids.len());
            for id in ids {
                let conversation =
                    repo::conversations::get(c, id)?.ok_or_else(|| Error::not_found("conversation"))?;
                let other = conversation.other(user);
                let marker = repo::messages::read_marker(c, id, user)?;
                let unread: i64 = c.query_row(
                    "SELECT count(*) FROM messages \
                     WHERE conversation_id = ?1 AND sender_id != ?2 AND seq > ?3",
                    params![id, user, marker],
                    |r| r.get(0),
                )?;
                let last_seq = repo::messages::last_seq(c, id)?;
                let last_message = c
                    .query_row(
                        "SELECT seq, id, conversation_id, sender_id, body, sent_at \
                         FROM messages WHERE seq = ?1",
                        [last_seq],
                        repo::messages::from_row,
                    )
                    .optional()?
                    .map(|(_, m)| m);
                items.push(ConversationView {
                    other_user_id: other,
                    other_username: display_username(c, other)?,
                    conversation,
                    last_message,
                    unread_count: unread as u64,
                });
            }
            let total = repo::conversations::count_for_user(c, user)?;
            Ok(Page::new(items, req, total))
        })
    }

    /// Chronological page of messages; marks everything up to the page's last
    /// message as read for the caller.
    pub fn list_messages(
        &self,
        user: UserId,
        conversation: ConversationId,
        req: PageRequest,
    ) -> Result<Page<MessageView>> {
        let req = PageRequest::new(req.page, req.page_size)?;
        self.store.with_transaction(|tx| {
            participant_conversation(tx, conversation, user)?;
            let rows = repo::messages::list(tx, conversation, req.page, req.page_size)?;
            if let Some((seq, _)) = rows.last() {
                repo::messages::set_read_marker(tx, conversation, user, *seq)?;
            }
            let mut items = Vec::with_capacity(rows.len());
            for (_, message) in rows {
                items.push(MessageView {
                    sender_username: display_username(tx, message.sender_id)?,
                    message,
                });
            }
            let total = repo::messages::count(tx, conversation)?;
            Ok(Page::new(items, req, total))
        })
    }
}
