//! Accounts and bearer tokens.
//!
//! A login returns a random secret exactly once. Only its SHA-512 digest is
//! stored, next to an expiry computed from the configured TTL. Passwords are
//! kept as Argon2id PHC strings.

use argon2::password_hash::{PasswordHash, PasswordHasher, PasswordVerifier, SaltString};
use argon2::{Algorithm, Argon2, Params, Version};
use rand::rngs::OsRng;
use rand::RngCore;
use sha2::{Digest, Sha512};

use crate::config::PasswordCost;
use crate::error::{Error, Result};
use crate::hub::{DataHub, Principal};
use crate::model::*;
use crate::persistence::repo::{self, tokens::TokenRow};

/// Bytes of randomness in a token secret (hex-encoded on the wire).
pub const TOKEN_SECRET_BYTES: usize = 32;

/// Lowercase hex SHA-512 of `secret`.
pub fn hash_token(secret: &[u8]) -> String {
    hex::encode(Sha512::digest(secret))
}

fn argon2(cost: PasswordCost) -> Argon2<'static> {
    let params = Params::new(cost.memory_kib, cost.iterations, cost.parallelism, None)
        .expect("valid argon2 parameters");
    Argon2::new(Algorithm::Argon2id, Version::V0x13, params)
}

pub fn hash_password(password: &str, cost: PasswordCost) -> String {
    let salt = SaltString::generate(&mut OsRng);
    argon2(cost)
        .hash_password(password.as_bytes(), &salt)
        .expect("argon2 hashing with valid params")
        .to_string()
}

/// Parameters are read back from the PHC string, so digests made with an
/// older cost setting keep verifying.
pub fn verify_password(password: &str, digest: &str) -> bool {
    match PasswordHash::new(digest) {
        Ok(parsed) => Argon2::default()
            .verify_password(password.as_bytes(), &parsed)
            .is_ok(),
        Err(_) => false,
    }
}

/// A freshly issued token. `secret` is never stored and cannot be recovered.
#[derive(Clone, Debug)]
pub struct IssuedToken {
    pub token_id: TokenId,
    pub user_id: UserId,
    pub secret: String,
    pub expires_at: Timestamp,
}

#[derive(Clone, Debug, Default)]
pub struct ProfileChanges {
    pub display_name: Option<String>,
    pub email: Option<String>,
    pub password: Option<String>,
}

#[derive(Clone, Debug)]
pub struct Registration<'a> {
    pub username: &'a str,
    pub email: &'a str,
    pub password: &'a str,
    pub display_name: &'a str,
    pub is_admin: bool,
}

impl DataHub {
    pub fn register(
        &self,
        username: &str,
        email: &str,
        password: &str,
        display_name: &str,
    ) -> Result<UserAccount> {
        self.create_account(Registration {
            username,
            email,
            password,
            display_name,
            is_admin: false,
        })
    }

    pub fn create_account(&self, reg: Registration<'_>) -> Result<UserAccount> {
        let username = validate_username(reg.username)?;
        let email = validate_email(reg.email)?;
        validate_password(reg.password)?;
        let display_name = validate_display_name(reg.display_name)?;
        let user = UserAccount {
            id: UserId::new(),
            username,
            email,
            password_digest: hash_password(reg.password, self.config.password_cost),
            display_name,
            is_admin: reg.is_admin,
            created_at: self.now(),
            is_active: true,
            deleted_at: None,
        };
        self.store
            .with_transaction(|tx| repo::users::insert(tx, &user))
            .map_err(|e| {
                if e.is_unique_violation() {
                    Error::conflict(format!("username {:?} is taken", user.username))
                } else {
                    e
                }
            })?;
        tracing::info!(user = %user.id, username = %user.username, "registered account");
        Ok(user)
    }

    /// Checks credentials and issues a new token. Every failure cause yields
    /// the same `Unauthorized`.
    pub fn login(&self, username: &str, password: &str) -> Result<IssuedToken> {
        let user = match validate_username(username) {
            Ok(name) => self
                .store
                .read(|c| repo::users::get_by_username(c, &name))?,
            Err(_) => None,
        };
        let Some(user) = user else {
            // Burn comparable time so unknown usernames are not distinguishable.
            let _ = verify_password(password, &dummy_digest(self.config.password_cost));
            return Err(Error::Unauthorized);
        };
        let password_ok = verify_password(password, &user.password_digest);
        if !password_ok || !user.is_active || user.is_deleted() {
            return Err(Error::Unauthorized);
        }
        self.issue_token(&user)
    }

    fn issue_token(&self, user: &UserAccount) -> Result<IssuedToken> {
        let mut raw = [0u8; TOKEN_SECRET_BYTES];
        OsRng.fill_bytes(&mut raw);
        let secret = hex::encode(raw);
        let created_at = self.now();
        let row = TokenRow {
            id: TokenId::new(),
            user_id: user.id,
            digest: hash_token(secret.as_bytes()),
            created_at,
            expires_at: created_at.plus_seconds(self.config.token_ttl_secs()),
        };
        self.store
            .with_transaction(|tx| repo::tokens::insert(tx, &row))?;
        Ok(IssuedToken {
            token_id: row.id,
            user_id: user.id,
            secret,
            expires_at: row.expires_at,
        })
    }

    /// Resolves a presented secret to its account.
    pub fn authenticate(&self, secret: &str) -> Result<Principal> {
        let digest = hash_token(secret.as_bytes());
        let now = self.now();
        self.store.read(|c| {
            let token = repo::tokens::find_by_digest(c, &digest)?.ok_or(Error::Unauthorized)?;
            if now >= token.expires_at {
                return Err(Error::TokenExpired);
            }
            let user = repo::users::get(c, token.user_id)?.ok_or(Error::Unauthorized)?;
            if !user.is_active || user.is_deleted() {
                return Err(Error::Unauthorized);
            }
            Ok(Principal {
                user,
                token_id: Some(token.id),
            })
        })
    }

    /// Revokes the presented token only.
    pub fn logout(&self, secret: &str) -> Result<()> {
        let principal = self.authenticate(secret)?;
        let token_id = principal.token_id.ok_or(Error::Unauthorized)?;
        let removed = self
            .store
            .with_transaction(|tx| repo::tokens::delete(tx, token_id))?;
        if removed {
            Ok(())
        } else {
            Err(Error::Unauthorized)
        }
    }

    pub fn update_profile(&self, who: &Principal, changes: ProfileChanges) -> Result<UserAccount> {
        let mut user = who.user.clone();
        if let Some(name) = changes.display_name.as_deref() {
            user.display_name = validate_display_name(name)?;
        }
        if let Some(email) = changes.email.as_deref() {
            user.email = validate_email(email)?;
        }
        if let Some(password) = changes.password.as_deref() {
            validate_password(password)?;
            user.password_digest = hash_password(password, self.config.password_cost);
        }
        let password_changed = changes.password.is_some();
        self.store.with_transaction(|tx| {
            let current = repo::users::get(tx, user.id)?.ok_or(Error::Unauthorized)?;
            if current.is_deleted() {
                return Err(Error::Unauthorized);
            }
            repo::users::update(tx, &user)?;
            if password_changed {
                repo::tokens::delete_for_user(tx, user.id, who.token_id)?;
            }
            Ok(())
        })?;
        Ok(user)
    }

    /// Deletes the caller's account. Owned datasets, authored reviews, tokens,
    /// notifications and memberships go; the user row stays as a tombstone so
    /// the username is retired and conversations keep their sender.
    pub fn delete_account(&self, who: &Principal) -> Result<()> {
        let now = self.now();
        let user_id = who.id();
        self.store.with_transaction(|tx| {
            let mut user = repo::users::get(tx, user_id)?.ok_or(Error::Unauthorized)?;
            if user.is_deleted() {
                return Err(Error::Unauthorized);
            }
            repo::tokens::delete_for_user(tx, user_id, None)?;
            for dataset in repo::datasets::ids_owned_by(tx, user_id)? {
                repo::datasets::delete(tx, dataset)?;
            }
            repo::reviews::delete_by_author(tx, user_id)?;
            repo::notifications::delete_for_recipient(tx, user_id)?;
            for membership in repo::memberships::for_user(tx, user_id)? {
                crate::organizations::remove_member(tx, membership.org_id, user_id, true)?;
            }
            user.email = String::new();
            user.display_name = String::new();
            user.password_digest = String::new();
            user.is_active = false;
            user.deleted_at = Some(now);
            repo::users::update(tx, &user)?;
            Ok(())
        })?;
        tracing::info!(user = %user_id, "deleted account");
        Ok(())
    }

    pub fn user_by_username(&self, username: &str) -> Result<UserAccount> {
        let name = username.to_lowercase();
        self.store
            .read(|c| repo::users::get_by_username(c, &name))?
            .filter(|u| !u.is_deleted())
            .ok_or_else(|| Error::not_found("user"))
    }

    pub fn user_by_id(&self, id: UserId) -> Result<UserAccount> {
        self.store
            .read(|c| repo::users::get(c, id))?
            .ok_or_else(|| Error::not_found("user"))
    }
}

fn dummy_digest(cost: PasswordCost) -> String {
    use std::sync::OnceLock;
    static DUMMY: OnceLock<(PasswordCost, String)> = OnceLock::new();
    let (cached_cost, digest) =
        DUMMY.get_or_init(|| (cost, hash_password("not a real password", cost)));
    if *cached_cost == cost {
        digest.clone()
    } else {
        hash_password("not a real password", cost)
    }
}
