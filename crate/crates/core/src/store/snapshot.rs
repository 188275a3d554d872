//! Line-oriented text snapshot of a [`StoreData`].
//!
//! ```text
//! #users
//! <userId>\t<regId>\t<fpHash>\t<name>
//! #atms
//! <atmId>\t<lat>\t<lon>
//! #passwords
//! <digest>\t<expiryMs>
//! #allocations
//! <userId>\t<digest>\t<atmId>\t<true|false>
//! #end
//! ```
//!
//! Sections always appear in this order, each header exactly once. The
//! trailing `#end` marks a complete file so a truncated snapshot is refused.

use std::io::{self, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::{AllocationRecord, PasswordRecord, StoreData, StoreError, UserRecord};
use crate::geo::{AtmRecord, GeoPoint};

const SECTIONS: [&str; 4] = ["#users", "#atms", "#passwords", "#allocations"];
const END: &str = "#end";

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("snapshot line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("snapshot is inconsistent: {0}")]
    Integrity(#[from] StoreError),
}

impl SnapshotError {
    pub(crate) fn io(path: &Path, source: io::Error) -> Self {
        SnapshotError::Io { path: path.to_owned(), source }
    }

    fn parse(line: usize, message: impl Into<String>) -> Self {
        SnapshotError::Parse { line, message: message.into() }
    }
}

impl From<io::Error> for SnapshotError {
    fn from(source: io::Error) -> Self {
        SnapshotError::Io { path: PathBuf::new(), source }
    }
}

pub fn write_snapshot<W: Write>(data: &StoreData, mut out: W) -> io::Result<()> {
    writeln!(out, "{}", SECTIONS[0])?;
    for u in data.users.values() {
        writeln!(out, "{}\t{}\t{}\t{}", u.user_id, u.reg_id, u.fp_hash, u.name)?;
    }
    writeln!(out, "{}", SECTIONS[1])?;
    for a in data.atms.values() {
        writeln!(out, "{}\t{}\t{}", a.atm_id, a.position.lat_deg(), a.position.lon_deg())?;
    }
    writeln!(out, "{}", SECTIONS[2])?;
    for p in data.passwords.values() {
        writeln!(out, "{}\t{}", p.digest, p.expiry_ms)?;
    }
    writeln!(out, "{}", SECTIONS[3])?;
    for a in data.allocations.values() {
        writeln!(out, "{}\t{}\t{}\t{}", a.user_id, a.digest, a.atm_id, a.used)?;
    }
    writeln!(out, "{END}")?;
    out.flush()
}

fn fields(line_no: usize, line: &str, n: usize) -> Result<Vec<&str>, SnapshotError> {
    let parts: Vec<&str> = line.split('\t').collect();
    if parts.len() != n {
        return Err(SnapshotError::parse(line_no, format!("expected {n} tab-separated fields, found {}", parts.len())));
    }
    Ok(parts)
}

fn number<T: std::str::FromStr>(line_no: usize, what: &str, s: &str) -> Result<T, SnapshotError> {
    s.parse().map_err(|_| SnapshotError::parse(line_no, format!("bad {what} {s:?}")))
}

fn record_error(line_no: usize, e: impl std::fmt::Display) -> SnapshotError {
    SnapshotError::parse(line_no, e.to_string())
}

/// Parses snapshot text and checks the result for referential integrity.
pub fn parse_snapshot(text: &str) -> Result<StoreData, SnapshotError> {
    let mut data = StoreData::default();
    let mut section: Option<usize> = None;
    let mut finished = false;
    let mut last_line = 0;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        last_line = line_no;
        if finished {
            return Err(SnapshotError::parse(line_no, "content after #end"));
        }
        let expected_next = section.map_or(0, |s| s + 1);
        if let Some(pos) = SECTIONS.iter().position(|h| *h == raw) {
            if pos != expected_next {
                return Err(SnapshotError::parse(line_no, format!("unexpected section {raw}")));
            }
            section = Some(pos);
            continue;
        }
        if raw == END {
            if section != Some(SECTIONS.len() - 1) {
                return Err(SnapshotError::parse(line_no, "#end before all sections"));
            }
            finished = true;
            continue;
        }
        match section {
            None => return Err(SnapshotError::parse(line_no, "expected #users header")),
            Some(0) => {
                let f = fields(line_no, raw, 4)?;
                let user = UserRecord::new(f[0], f[1], f[2], f[3]).map_err(|e| record_error(line_no, e))?;
                if data.users.insert(user.user_id.clone(), user).is_some() {
                    return Err(SnapshotError::parse(line_no, format!("duplicate user {}", f[0])));
                }
            }
            Some(1) => {
                let f = fields(line_no, raw, 3)?;
                let lat = number(line_no, "latitude", f[1])?;
                let lon = number(line_no, "longitude", f[2])?;
                let pos = GeoPoint::new(lat, lon).map_err(|e| record_error(line_no, e))?;
                if data.atms.insert(f[0].to_owned(), AtmRecord::new(f[0], pos)).is_some() {
                    return Err(SnapshotError::parse(line_no, format!("duplicate ATM {}", f[0])));
                }
            }
            Some(2) => {
                let f = fields(line_no, raw, 2)?;
                let expiry_ms = number(line_no, "expiry", f[1])?;
                let rec = PasswordRecord { digest: f[0].to_owned(), expiry_ms };
                if data.passwords.insert(f[0].to_owned(), rec).is_some() {
                    return Err(SnapshotError::parse(line_no, "duplicate password digest"));
                }
            }
            Some(_) => {
                let f = fields(line_no, raw, 4)?;
                let used = match f[3] {
                    "true" => true,
                    "false" => false,
                    other => return Err(SnapshotError::parse(line_no, format!("bad flag {other:?}"))),
                };
                let rec = AllocationRecord { user_id: f[0].to_owned(), digest: f[1].to_owned(), atm_id: f[2].to_owned(), used };
                if data.allocations.insert(f[0].to_owned(), rec).is_some() {
                    return Err(SnapshotError::parse(line_no, format!("second allocation for user {}", f[0])));
                }
            }
        }
    }
    if !finished {
        let missing = section.map_or(SECTIONS[0], |s| SECTIONS.get(s + 1).copied().unwrap_or(END));
        return Err(SnapshotError::parse(last_line + 1, format!("truncated: expected {missing}")));
    }
    data.check_integrity()?;
    Ok(data)
}
