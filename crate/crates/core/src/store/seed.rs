//! CSV seed files for users and terminals.
//!
//! Users: `userId,regId,fixedPassword,name`. The fixed password is hashed as
//! the row is read and the plaintext is dropped.
//!
//! Terminals: `atmId,lat,lon`.

use std::collections::HashSet;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use thiserror::Error;

use super::UserRecord;
use crate::geo::{AtmRecord, GeoPoint};

pub const USER_SEED_HEADER: [&str; 4] = ["userId", "regId", "fixedPassword", "name"];
pub const ATM_SEED_HEADER: [&str; 3] = ["atmId", "lat", "lon"];

#[derive(Debug, Error)]
pub enum SeedError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: {message}")]
    Invalid { line: u64, message: String },
    #[error("line {line}: duplicate id {id:?}")]
    Duplicate { line: u64, id: String },
}

impl SeedError {
    /// One-based line of the offending row, if the error has one.
    pub fn line(&self) -> Option<u64> {
        match self {
            SeedError::Io { .. } => None,
            SeedError::Invalid { line, .. } | SeedError::Duplicate { line, .. } => Some(*line),
        }
    }
}

fn invalid(line: u64, message: impl Into<String>) -> SeedError {
    SeedError::Invalid { line, message: message.into() }
}

fn rows<R: Read>(
    input: R,
    header: &[&str],
    mut each: impl FnMut(u64, &csv::StringRecord) -> Result<(), SeedError>,
) -> Result<(), SeedError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(input);
    let found = reader.headers().map_err(|e| invalid(1, e.to_string()))?.clone();
    if found.iter().map(str::trim).ne(header.iter().copied()) {
        return Err(invalid(1, format!("expected header {}", header.join(","))));
    }
    for result in reader.records() {
        let record = result.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            invalid(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != header.len() {
            return Err(invalid(line, format!("expected {} fields, found {}", header.len(), record.len())));
        }
        each(line, &record)?;
    }
    Ok(())
}

pub fn read_user_seed<R: Read>(input: R) -> Result<Vec<UserRecord>, SeedError> {
    let mut users = Vec::new();
    let mut seen = HashSet::new();
    rows(input, &USER_SEED_HEADER, |line, r| {
        let user = UserRecord::with_fixed_password(r[0].trim(), r[1].trim(), &r[2], r[3].trim())
            .map_err(|e| invalid(line, e.to_string()))?;
        if !seen.insert(user.user_id.clone()) {
            return Err(SeedError::Duplicate { line, id: user.user_id });
        }
        users.push(user);
        Ok(())
    })?;
    Ok(users)
}

pub fn read_atm_seed<R: Read>(input: R) -> Result<Vec<AtmRecord>, SeedError> {
    let mut atms = Vec::new();
    let mut seen = HashSet::new();
    rows(input, &ATM_SEED_HEADER, |line, r| {
        let id = r[0].trim();
        let coord = |i: usize, what: &str| {
            r[i].trim().parse::<f64>().map_err(|_| invalid(line, format!("bad {what} {:?}", &r[i])))
        };
        let position = GeoPoint::new(coord(1, "latitude")?, coord(2, "longitude")?)
            .map_err(|e| invalid(line, e.to_string()))?;
        let atm = AtmRecord::new(id, position);
        super::validate_atm(&atm).map_err(|e| invalid(line, e.to_string()))?;
        if !seen.insert(id.to_owned()) {
            return Err(SeedError::Duplicate { line, id: id.to_owned() });
        }
        atms.push(atm);
        Ok(())
    })?;
    Ok(atms)
}

fn open(path: &Path) -> Result<File, SeedError> {
    File::open(path).map_err(|source| SeedError::Io { path: path.display().to_string(), source })
}

pub fn load_user_seed(path: impl AsRef<Path>) -> Result<Vec<UserRecord>, SeedError> {
    read_user_seed(open(path.as_ref())?)
}

pub fn load_atm_seed(path: impl AsRef<Path>) -> Result<Vec<AtmRecord>, SeedError> {
    read_atm_seed(open(path.as_ref())?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::otp::sha512_hex;

    #[test]
    fn users_are_hashed_on_ingest() {
        let csv = "userId,regId,fixedPassword,name\nu001,r001,1234,Ada Lovelace\nu002,r002,\"a,b\",\n";
        let users = read_user_seed(csv.as_bytes()).unwrap();
        assert_eq!(users.len(), 2);
        assert_eq!(users[0].fp_hash, sha512_hex(b"1234"));
        assert_eq!(users[0].name, "Ada Lovelace");
        assert_eq!(users[1].fp_hash, sha512_hex(b"a,b"));
        assert!(!format!("{users:?}").contains("1234,"));
    }

    #[test]
    fn atms_parse() {
        let csv = "atmId,lat,lon\natm1,51.5,-0.12\natm2, 51.6 , 0\n";
        let atms = read_atm_seed(csv.as_bytes()).unwrap();
        assert_eq!(atms[1].position.lat_deg(), 51.6);
    }

    #[test]
    fn headers_only_is_empty() {
        assert!(read_user_seed("userId,regId,fixedPassword,name\n".as_bytes()).unwrap().is_empty());
        assert!(read_atm_seed("atmId,lat,lon\n".as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn duplicates_report_their_line() {
        let csv = "atmId,lat,lon\natm1,51.5,0\natm2,51.5,0\natm1,1,1\n";
        match read_atm_seed(csv.as_bytes()) {
            Err(SeedError::Duplicate { line: 4, id }) => assert_eq!(id, "atm1"),
            other => panic!("{other:?}"),
        }
        let csv = "userId,regId,fixedPassword,name\nu1,r,p,n\nu1,r,p,n\n";
        assert_eq!(read_user_seed(csv.as_bytes()).unwrap_err().line(), Some(3));
    }

    #[test]
    fn bad_rows() {
        assert_eq!(read_atm_seed("atmId,lat,lon\na,91,0\n".as_bytes()).unwrap_err().line(), Some(2));
        assert_eq!(read_atm_seed("atmId,lat,lon\na,x,0\n".as_bytes()).unwrap_err().line(), Some(2));
        assert_eq!(read_atm_seed("atmId,lat,lon\na,1\n".as_bytes()).unwrap_err().line(), Some(2));
        assert_eq!(read_atm_seed("atmId,lat,lon\nmy atm,1,1\n".as_bytes()).unwrap_err().line(), Some(2));
        assert_eq!(read_atm_seed("id,lat,lon\n".as_bytes()).unwrap_err().line(), Some(1));
        assert_eq!(read_user_seed("userId,regId,fixedPassword,name\n,r,p,n\n".as_bytes()).unwrap_err().line(), Some(2));
    }
}
