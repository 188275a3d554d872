//! `key=value` properties file.
//!
//! Blank lines and lines starting with `#` or `!` are skipped. Unknown keys
//! are logged and ignored. Relative paths resolve against the directory of
//! the file they appear in.

use std::path::{Path, PathBuf};

use log::warn;
use thiserror::Error;

use crate::geo::DEFAULT_RADIUS_M;
use crate::otp::{Alphabet, DEFAULT_MAX_ATTEMPTS, DEFAULT_PASSWORD_LEN};
use crate::wire::ResponseMode;

pub const DEFAULT_PORT: u16 = 7001;
pub const DEFAULT_TTL_MS: i64 = 5 * 60 * 1000;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub listen_host: String,
    pub listen_port: u16,
    pub radius_m: f64,
    pub password_length: usize,
    pub password_ttl_ms: i64,
    pub password_alphabet: Alphabet,
    pub password_max_attempts: usize,
    pub response_mode: ResponseMode,
    pub snapshot_path: Option<PathBuf>,
    pub tls_enabled: bool,
    pub tls_cert: Option<PathBuf>,
    pub tls_key: Option<PathBuf>,
    pub seed_users: Option<PathBuf>,
    pub seed_atms: Option<PathBuf>,
    /// Loopback port for terminal logins; disabled when `None`.
    pub admin_port: Option<u16>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            listen_host: "0.0.0.0".to_owned(),
            listen_port: DEFAULT_PORT,
            radius_m: DEFAULT_RADIUS_M,
            password_length: DEFAULT_PASSWORD_LEN,
            password_ttl_ms: DEFAULT_TTL_MS,
            password_alphabet: Alphabet::default(),
            password_max_attempts: DEFAULT_MAX_ATTEMPTS,
            response_mode: ResponseMode::default(),
            snapshot_path: None,
            tls_enabled: false,
            tls_cert: None,
            tls_key: None,
            seed_users: None,
            seed_atms: None,
            admin_port: None,
        }
    }
}

impl ServerConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: &str| Err(ConfigError::Invalid(m.to_owned()));
        if !(self.radius_m > 0.0 && self.radius_m.is_finite()) {
            return invalid("radius.m must be positive");
        }
        if self.password_ttl_ms <= 0 {
            return invalid("password.ttl.ms must be positive");
        }
        if self.password_length == 0 {
            return invalid("password.length must be at least 1");
        }
        if self.password_max_attempts == 0 {
            return invalid("password.max.attempts must be at least 1");
        }
        if self.tls_enabled && (self.tls_cert.is_none() || self.tls_key.is_none()) {
            return invalid("tls.enabled requires tls.cert and tls.key");
        }
        Ok(())
    }
}

fn parse_value<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::Line { line, message: format!("bad value {value:?} for {key}") })
}

fn parse_bool(line: usize, key: &str, value: &str) -> Result<bool, ConfigError> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(ConfigError::Line { line, message: format!("bad value {value:?} for {key}") }),
    }
}

/// Parses properties text. `base` anchors relative paths.
pub fn parse_config(text: &str, base: &Path) -> Result<ServerConfig, ConfigError> {
    let mut c = ServerConfig::default();
    let path = |v: &str| Some(base.join(v));
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') || trimmed.starts_with('!') {
            continue;
        }
        let (key, value) = trimmed
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| ConfigError::Line { line, message: format!("expected key=value, got {trimmed:?}") })?;
        match key {
            "listen.host" => c.listen_host = value.to_owned(),
            "listen.port" => c.listen_port = parse_value(line, key, value)?,
            "radius.m" => c.radius_m = parse_value(line, key, value)?,
            "password.length" => c.password_length = parse_value(line, key, value)?,
            "password.ttl.ms" => c.password_ttl_ms = parse_value(line, key, value)?,
            "password.max.attempts" => c.password_max_attempts = parse_value(line, key, value)?,
            "password.alphabet" => {
                c.password_alphabet =
                    Alphabet::new(value).map_err(|e| ConfigError::Line { line, message: e.to_string() })?
            }
            "response.mode" => {
                c.response_mode = value.parse().map_err(|message| ConfigError::Line { line, message })?
            }
            "snapshot.path" => c.snapshot_path = path(value),
            "tls.enabled" => c.tls_enabled = parse_bool(line, key, value)?,
            "tls.cert" => c.tls_cert = path(value),
            "tls.key" => c.tls_key = path(value),
            "seed.users" => c.seed_users = path(value),
            "seed.atms" => c.seed_atms = path(value),
            "admin.port" => c.admin_port = Some(parse_value(line, key, value)?),
            _ => warn!("config line {line}: unknown key {key:?} ignored"),
        }
    }
    c.validate()?;
    Ok(c)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ServerConfig, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
    parse_config(&text, path.parent().unwrap_or(Path::new(".")))
}
