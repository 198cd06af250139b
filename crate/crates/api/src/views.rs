//! Response bodies that differ from the core entities.

use datadock_core::{
    Dataset, DatasetDetail, IssuedToken, RatingSummary, Review, Timestamp, UserAccount, UserId,
};
use serde::{Deserialize, Serialize};

/// An account as shown to its owner. The password digest never leaves the server.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserView {
    pub id: UserId,
    pub username: String,
    pub email: String,
    pub display_name: String,
    pub is_admin: bool,
    pub created_at: Timestamp,
}

impl From<UserAccount> for UserView {
    fn from(u: UserAccount) -> Self {
        UserView {
            id: u.id,
            username: u.username,
            email: u.email,
            display_name: u.display_name,
            is_admin: u.is_admin,
            created_at: u.created_at,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoginResponse {
    pub token: String,
    pub expires_at: Timestamp,
    pub user_id: UserId,
}

impl From<IssuedToken> for LoginResponse {
    fn from(t: IssuedToken) -> Self {
        LoginResponse {
            token: t.secret,
            expires_at: t.expires_at,
            user_id: t.user_id,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DatasetView {
    #[serde(flatten)]
    pub dataset: Dataset,
    pub owner_username: String,
    pub total_size_bytes: u64,
    pub rating: RatingSummary,
}

impl From<DatasetDetail> for DatasetView {
    fn from(d: DatasetDetail) -> Self {
        DatasetView {
            total_size_bytes: d.dataset.total_size(),
            dataset: d.dataset,
            owner_username: d.owner_username,
            rating: d.rating,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewView {
    #[serde(flatten)]
    pub review: Review,
    pub author_username: String,
}
