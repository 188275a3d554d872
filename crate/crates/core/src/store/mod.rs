//! The credential store: users, terminals, issued password digests and the
//! live allocations binding a digest to a user and a terminal.
//!
//! Two cleanup rules run after every allocation insert:
//!
//! * allocations whose password expiry is at or before `now` are dropped;
//! * allocations already marked used are dropped.
//!
//! Issued digests are never deleted, so uniqueness of new passwords is
//! checked against every password ever handed out.
//!
//! The store never reads a clock. Every time-dependent call takes the
//! current instant as epoch milliseconds.

mod seed;
mod snapshot;

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};

use log::{debug, warn};
use parking_lot::{Mutex, RwLock};
use thiserror::Error;

use crate::geo::{AtmRecord, AtmRegistry};
use crate::otp::{is_digest_hex, sha512_hex};

pub use seed::{load_atm_seed, load_user_seed, read_atm_seed, read_user_seed, SeedError};
pub use snapshot::{parse_snapshot, write_snapshot, SnapshotError};

/// Past this many retained password digests a warning is logged.
pub const DEFAULT_PASSWORD_WARN_COUNT: usize = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StoreError {
    #[error("unknown user {0:?}")]
    UnknownUser(String),
    #[error("unknown ATM {0:?}")]
    UnknownAtm(String),
    #[error("unknown password digest {0}")]
    UnknownDigest(String),
    #[error("duplicate user {0:?}")]
    DuplicateUser(String),
    #[error("duplicate ATM {0:?}")]
    DuplicateAtm(String),
    #[error("password digest already issued")]
    DuplicateDigest,
    #[error("no matching allocation")]
    AllocationNotFound,
    #[error("invalid {field}: {reason}")]
    InvalidField { field: &'static str, reason: String },
    #[error("inconsistent store: {0}")]
    Integrity(String),
}

fn check_token(field: &'static str, value: &str) -> Result<(), StoreError> {
    if value.is_empty() {
        return Err(StoreError::InvalidField { field, reason: "empty".into() });
    }
    if value.chars().any(|c| c.is_whitespace() || c.is_control()) {
        return Err(StoreError::InvalidField { field, reason: format!("{value:?} contains whitespace") });
    }
    Ok(())
}

fn check_digest(field: &'static str, value: &str) -> Result<(), StoreError> {
    if is_digest_hex(value) {
        Ok(())
    } else {
        Err(StoreError::InvalidField { field, reason: "not a lowercase hex SHA-512 digest".into() })
    }
}

/// A registered user. Only the digest of the fixed password is kept.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserRecord {
    pub user_id: String,
    pub reg_id: String,
    pub fp_hash: String,
    pub name: String,
}

impl UserRecord {
    pub fn new(
        user_id: impl Into<String>,
        reg_id: impl Into<String>,
        fp_hash: impl Into<String>,
        name: impl Into<String>,
    ) -> Result<Self, StoreError> {
        let user = UserRecord { user_id: user_id.into(), reg_id: reg_id.into(), fp_hash: fp_hash.into(), name: name.into() };
        user.validate()?;
        Ok(user)
    }

    /// Hashes `fixed_password` and builds the record.
    pub fn with_fixed_password(
        user_id: impl Into<String>,
        reg_id: impl Into<String>,
        fixed_password: &str,
        name: impl Into<String>,
    ) -> Result<Self, StoreError> {
        UserRecord::new(user_id, reg_id, sha512_hex(fixed_password.as_bytes()), name)
    }

    fn validate(&self) -> Result<(), StoreError> {
        check_token("user id", &self.user_id)?;
        check_token("registration id", &self.reg_id)?;
        check_digest("fixed password hash", &self.fp_hash)?;
        if self.name.chars().any(|c| c == '\t' || c.is_control()) {
            return Err(StoreError::InvalidField { field: "name", reason: "contains a tab or control character".into() });
        }
        Ok(())
    }
}

fn validate_atm(atm: &AtmRecord) -> Result<(), StoreError> {
    check_token("ATM id", &atm.atm_id)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PasswordRecord {
    pub digest: String,
    pub expiry_ms: i64,
}

/// Live binding of a password to one user and one terminal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AllocationRecord {
    pub user_id: String,
    pub digest: String,
    pub atm_id: String,
    pub used: bool,
}

/// Plain contents of a store. Allocations are keyed by user id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StoreData {
    pub users: BTreeMap<String, UserRecord>,
    pub atms: BTreeMap<String, AtmRecord>,
    pub passwords: BTreeMap<String, PasswordRecord>,
    pub allocations: BTreeMap<String, AllocationRecord>,
}

impl StoreData {
    /// Checks keys, field formats and that every allocation resolves.
    pub fn check_integrity(&self) -> Result<(), StoreError> {
        let bad = |msg: String| Err(StoreError::Integrity(msg));
        for (key, user) in &self.users {
            if key != &user.user_id {
                return bad(format!("user keyed {key:?} has id {:?}", user.user_id));
            }
            user.validate()?;
        }
        for (key, atm) in &self.atms {
            if key != &atm.atm_id {
                return bad(format!("ATM keyed {key:?} has id {:?}", atm.atm_id));
            }
            validate_atm(atm)?;
        }
        for (key, pw) in &self.passwords {
            if key != &pw.digest {
                return bad(format!("password keyed {key} has digest {}", pw.digest));
            }
            check_digest("password digest", &pw.digest)?;
        }
        let mut seen_digests = std::collections::HashSet::new();
        for (key, alloc) in &self.allocations {
            if key != &alloc.user_id {
                return bad(format!("allocation keyed {key:?} belongs to {:?}", alloc.user_id));
            }
            if !self.users.contains_key(&alloc.user_id) {
                return bad(format!("allocation for unknown user {:?}", alloc.user_id));
            }
            if !self.atms.contains_key(&alloc.atm_id) {
                return bad(format!("allocation at unknown ATM {:?}", alloc.atm_id));
            }
            if !self.passwords.contains_key(&alloc.digest) {
                return bad(format!("allocation with unknown digest {}", alloc.digest));
            }
            if !seen_digests.insert(alloc.digest.as_str()) {
                return bad(format!("digest {} allocated twice", alloc.digest));
            }
        }
        Ok(())
    }

    fn sweep_expired(&mut self, now_ms: i64) -> usize {
        let before = self.allocations.len();
        let passwords = &self.passwords;
        self.allocations
            .retain(|_, a| passwords.get(&a.digest).is_some_and(|p| p.expiry_ms > now_ms));
        before - self.allocations.len()
    }

    fn sweep_used(&mut self) -> usize {
        let before = self.allocations.len();
        self.allocations.retain(|_, a| !a.used);
        before - self.allocations.len()
    }

    fn live_allocation(&self, atm_id: &str, user_id: &str, digest: &str, now_ms: i64) -> bool {
        self.allocations.get(user_id).is_some_and(|a| {
            a.atm_id == atm_id
                && a.digest == digest
                && !a.used
                && self.passwords.get(digest).is_some_and(|p| p.expiry_ms > now_ms)
        })
    }
}

/// Row counts, in the order users, ATMs, passwords, allocations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StoreCounts {
    pub users: usize,
    pub atms: usize,
    pub passwords: usize,
    pub allocations: usize,
}

/// What the post-insert cleanup removed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SweepReport {
    pub expired: usize,
    pub used: usize,
}

/// Shared, internally synchronized store.
///
/// Mutations are serialized behind one writer lock and each allocation
/// insert runs together with its cleanup sweeps, so readers never observe a
/// user with two allocations.
#[derive(Debug)]
pub struct Store {
    data: RwLock<StoreData>,
    persist: Mutex<()>,
    password_warn_count: usize,
    warned: AtomicBool,
}

impl Default for Store {
    fn default() -> Self {
        Store::new()
    }
}

impl Store {
    pub fn new() -> Self {
        Store::from_parts(StoreData::default())
    }

    fn from_parts(data: StoreData) -> Self {
        Store {
            data: RwLock::new(data),
            persist: Mutex::new(()),
            password_warn_count: DEFAULT_PASSWORD_WARN_COUNT,
            warned: AtomicBool::new(false),
        }
    }

    pub fn from_data(data: StoreData) -> Result<Self, StoreError> {
        data.check_integrity()?;
        Ok(Store::from_parts(data))
    }

    pub fn with_password_warn_count(mut self, count: usize) -> Self {
        self.password_warn_count = count;
        self
    }

    pub fn add_user(&self, user: UserRecord) -> Result<(), StoreError> {
        user.validate()?;
        let mut data = self.data.write();
        if data.users.contains_key(&user.user_id) {
            return Err(StoreError::DuplicateUser(user.user_id));
        }
        data.users.insert(user.user_id.clone(), user);
        Ok(())
    }

    pub fn add_atm(&self, atm: AtmRecord) -> Result<(), StoreError> {
        validate_atm(&atm)?;
        let mut data = self.data.write();
        if data.atms.contains_key(&atm.atm_id) {
            return Err(StoreError::DuplicateAtm(atm.atm_id));
        }
        data.atms.insert(atm.atm_id.clone(), atm);
        Ok(())
    }

    pub fn find_user(&self, user_id: &str) -> Option<UserRecord> {
        self.data.read().users.get(user_id).cloned()
    }

    /// Copy of the registered terminals for nearest-terminal lookups.
    pub fn atm_registry(&self) -> AtmRegistry {
        self.data.read().atms.values().cloned().collect()
    }

    /// True if `digest` was ever issued, expired or not.
    pub fn password_digest_exists(&self, digest: &str) -> bool {
        self.data.read().passwords.contains_key(digest)
    }

    pub fn allocation_for(&self, user_id: &str) -> Option<AllocationRecord> {
        self.data.read().allocations.get(user_id).cloned()
    }

    pub fn password(&self, digest: &str) -> Option<PasswordRecord> {
        self.data.read().passwords.get(digest).cloned()
    }

    pub fn counts(&self) -> StoreCounts {
        let data = self.data.read();
        StoreCounts {
            users: data.users.len(),
            atms: data.atms.len(),
            passwords: data.passwords.len(),
            allocations: data.allocations.len(),
        }
    }

    /// Issues `digest` to `user_id` at `atm_id`, replacing any allocation the
    /// user already holds, then runs both cleanup sweeps.
    pub fn replace_allocation(
        &self,
        user_id: &str,
        digest: &str,
        atm_id: &str,
        expiry_ms: i64,
        now_ms: i64,
    ) -> Result<SweepReport, StoreError> {
        check_digest("password digest", digest)?;
        let mut data = self.data.write();
        if !data.users.contains_key(user_id) {
            return Err(StoreError::UnknownUser(user_id.to_owned()));
        }
        if !data.atms.contains_key(atm_id) {
            return Err(StoreError::UnknownAtm(atm_id.to_owned()));
        }
        if data.passwords.contains_key(digest) {
            return Err(StoreError::DuplicateDigest);
        }
        if let Some(old) = data.allocations.remove(user_id) {
            debug!("replacing allocation for user {user_id} (digest {})", &old.digest[..16]);
        }
        data.passwords.insert(digest.to_owned(), PasswordRecord { digest: digest.to_owned(), expiry_ms });
        data.allocations.insert(
            user_id.to_owned(),
            AllocationRecord { user_id: user_id.to_owned(), digest: digest.to_owned(), atm_id: atm_id.to_owned(), used: false },
        );
        let report = SweepReport { expired: data.sweep_expired(now_ms), used: data.sweep_used() };
        let issued = data.passwords.len();
        drop(data);
        if issued > self.password_warn_count && !self.warned.swap(true, Ordering::Relaxed) {
            warn!("password table holds {issued} digests (warning threshold {})", self.password_warn_count);
        }
        Ok(report)
    }

    /// Drops allocations whose password expired at or before `now_ms`.
    pub fn sweep_expired(&self, now_ms: i64) -> usize {
        self.data.write().sweep_expired(now_ms)
    }

    /// Drops allocations marked used.
    pub fn sweep_used(&self) -> usize {
        self.data.write().sweep_used()
    }

    /// True iff `user_id` holds an unused, unexpired allocation at `atm_id`
    /// whose digest matches `password`.
    pub fn authenticate_atm_login(&self, atm_id: &str, user_id: &str, password: &str, now_ms: i64) -> bool {
        let digest = sha512_hex(password.as_bytes());
        self.data.read().live_allocation(atm_id, user_id, &digest, now_ms)
    }

    /// Flags an allocation as used. It stays in place until the next sweep.
    pub fn mark_used(&self, atm_id: &str, user_id: &str, digest: &str) -> Result<(), StoreError> {
        let mut data = self.data.write();
        match data.allocations.get_mut(user_id) {
            Some(a) if a.atm_id == atm_id && a.digest == digest => {
                a.used = true;
                Ok(())
            }
            _ => Err(StoreError::AllocationNotFound),
        }
    }

    /// Authenticates and marks used under one lock, so two terminals racing
    /// on the same password cannot both succeed.
    pub fn consume_login(&self, atm_id: &str, user_id: &str, password: &str, now_ms: i64) -> bool {
        let digest = sha512_hex(password.as_bytes());
        let mut data = self.data.write();
        if !data.live_allocation(atm_id, user_id, &digest, now_ms) {
            return false;
        }
        if let Some(a) = data.allocations.get_mut(user_id) {
            a.used = true;
        }
        true
    }

    /// Clone of the full contents.
    pub fn export(&self) -> StoreData {
        self.data.read().clone()
    }

    pub fn check_integrity(&self) -> Result<(), StoreError> {
        self.data.read().check_integrity()
    }

    /// Writes the store to `path` through a temporary file and a rename.
    pub fn snapshot(&self, path: impl AsRef<Path>) -> Result<(), SnapshotError> {
        let path = path.as_ref();
        let _guard = self.persist.lock();
        let mut buf = Vec::new();
        write_snapshot(&self.data.read(), &mut buf)?;
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, &buf).map_err(|e| SnapshotError::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| SnapshotError::io(path, e))
    }

    pub fn restore(path: impl AsRef<Path>) -> Result<Self, SnapshotError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| SnapshotError::io(path, e))?;
        let data = parse_snapshot(&text)?;
        Ok(Store::from_parts(data))
    }
}
