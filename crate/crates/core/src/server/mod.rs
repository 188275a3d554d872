//! The password service: configuration, the request workflow and the daemon.

mod clock;
mod config;
mod daemon;
mod service;
mod timings;
pub mod tls;

use std::path::Path;

use log::info;
use thiserror::Error;

pub use clock::{Clock, FakeClock, SystemClock};
pub use config::{load_config, parse_config, ConfigError, ServerConfig, DEFAULT_PORT, DEFAULT_TTL_MS};
pub use daemon::{serve_protocol, RunningServer, Server, ShutdownHandle, DENIED, LOGIN_OK};
pub use service::{
    CounterSnapshot, Reply, Service, MSG_BAD_CREDENTIALS, MSG_INTERNAL, MSG_NO_ATM, MSG_UNKNOWN_USER,
};
pub use timings::{ms, StageTimings};

use crate::store::{load_atm_seed, load_user_seed, SeedError, SnapshotError, Store, StoreError};

#[derive(Debug, Error)]
pub enum StartupError {
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("snapshot: {0}")]
    Snapshot(#[from] SnapshotError),
    #[error("seed {path}: {source}")]
    Seed { path: String, source: SeedError },
    #[error("store: {0}")]
    Store(#[from] StoreError),
    #[error("bind: {0}")]
    Bind(#[from] std::io::Error),
}

/// Builds the initial store.
///
/// An explicit `restore` snapshot wins. Otherwise an existing file at
/// `snapshot.path` is loaded. Otherwise the store starts from the seed files.
pub fn bootstrap_store(config: &ServerConfig, restore: Option<&Path>) -> Result<Store, StartupError> {
    let existing = config.snapshot_path.as_deref().filter(|p| p.exists());
    if let Some(path) = restore.or(existing) {
        let store = Store::restore(path)?;
        let c = store.counts();
        info!("restored {} users, {} terminals, {} allocations from {}", c.users, c.atms, c.allocations, path.display());
        return Ok(store);
    }
    let store = Store::new();
    if let Some(path) = &config.seed_users {
        let users = load_user_seed(path).map_err(|source| StartupError::Seed { path: path.display().to_string(), source })?;
        for user in users {
            store.add_user(user)?;
        }
    }
    if let Some(path) = &config.seed_atms {
        let atms = load_atm_seed(path).map_err(|source| StartupError::Seed { path: path.display().to_string(), source })?;
        for atm in atms {
            store.add_atm(atm)?;
        }
    }
    let c = store.counts();
    info!("seeded {} users and {} terminals", c.users, c.atms);
    Ok(store)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bootstrap_order() {
        let dir = tempfile::tempdir().unwrap();
        let users = dir.path().join("users.csv");
        let atms = dir.path().join("atms.csv");
        std::fs::write(&users, "userId,regId,fixedPassword,name\nu1,r1,pw,A\n").unwrap();
        std::fs::write(&atms, "atmId,lat,lon\na1,51.5,0\na2,51.6,0\n").unwrap();
        let mut config = ServerConfig {
            seed_users: Some(users),
            seed_atms: Some(atms),
            snapshot_path: Some(dir.path().join("snap.txt")),
            ..ServerConfig::default()
        };

        let seeded = bootstrap_store(&config, None).unwrap();
        assert_eq!((seeded.counts().users, seeded.counts().atms), (1, 2));

        // once a snapshot exists it takes precedence over the seeds
        let other = Store::new();
        other.snapshot(config.snapshot_path.as_ref().unwrap()).unwrap();
        assert_eq!(bootstrap_store(&config, None).unwrap().counts().atms, 0);

        let explicit = dir.path().join("explicit.txt");
        seeded.snapshot(&explicit).unwrap();
        assert_eq!(bootstrap_store(&config, Some(&explicit)).unwrap().counts().atms, 2);

        config.seed_atms = Some(dir.path().join("missing.csv"));
        config.snapshot_path = None;
        assert!(matches!(bootstrap_store(&config, None), Err(StartupError::Seed { .. })));
    }
}
