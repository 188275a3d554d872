//! Request and response line grammar.

use std::fmt;

use thiserror::Error;

use crate::geo::GeoPoint;
use crate::otp::Pin;

pub const GETPASS: &str = "GETPASS";
/// First line the server sends on every connection.
pub const ACK_LINE: &str = "LAPPS READY\n";

const SUCCESS_PREFIX: &str = "SUCCESS: ";
const FAIL_PREFIX: &str = "FAIL: ";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RequestError {
    #[error("unknown request {0:?}")]
    Unknown(String),
    #[error("malformed request: {0}")]
    Malformed(String),
}

/// `GETPASS <pin> <userId> <regId> <lat> <lon>`
#[derive(Debug, Clone, PartialEq)]
pub struct GetPassRequest {
    pub pin: Pin,
    pub user_id: String,
    pub reg_id: String,
    pub position: GeoPoint,
}

impl GetPassRequest {
    /// Request line including the trailing newline.
    pub fn to_line(&self) -> String {
        format!(
            "{GETPASS} {} {} {} {} {}\n",
            self.pin,
            self.user_id,
            self.reg_id,
            self.position.lat_deg(),
            self.position.lon_deg()
        )
    }
}

fn malformed(msg: impl Into<String>) -> RequestError {
    RequestError::Malformed(msg.into())
}

fn coordinate(token: &str, what: &str) -> Result<f64, RequestError> {
    token
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| malformed(format!("bad {what} {token:?}")))
}

/// Parses one newline-stripped request frame. A trailing `\r` is ignored.
pub fn parse_request(line: &str) -> Result<GetPassRequest, RequestError> {
    let line = line.strip_suffix('\r').unwrap_or(line);
    let mut tokens = line.split_ascii_whitespace();
    let verb = tokens.next().ok_or_else(|| malformed("empty request"))?;
    if verb != GETPASS {
        return Err(RequestError::Unknown(verb.chars().take(32).collect()));
    }
    let args: Vec<&str> = tokens.collect();
    let [pin, user_id, reg_id, lat, lon] = args[..] else {
        return Err(malformed(format!("{GETPASS} takes 5 arguments, got {}", args.len())));
    };
    let pin: Pin = pin.parse().map_err(|_| malformed("pin must be 8 decimal digits"))?;
    let position = GeoPoint::new(coordinate(lat, "latitude")?, coordinate(lon, "longitude")?)
        .map_err(|e| malformed(e.to_string()))?;
    Ok(GetPassRequest { pin, user_id: user_id.to_owned(), reg_id: reg_id.to_owned(), position })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Response {
    Success { atm_id: String, password: String },
    Fail { message: String },
}

impl Response {
    /// FAIL response; the message is folded onto one line.
    pub fn fail(message: impl AsRef<str>) -> Self {
        let cleaned: String =
            message.as_ref().chars().map(|c| if c.is_control() { ' ' } else { c }).collect();
        let trimmed = cleaned.trim();
        let message = if trimmed.is_empty() { "error".to_owned() } else { trimmed.to_owned() };
        Response::Fail { message }
    }

    pub fn is_success(&self) -> bool {
        matches!(self, Response::Success { .. })
    }

    /// Wire line without its newline.
    pub fn line(&self) -> String {
        match self {
            Response::Success { atm_id, password } => format!("{SUCCESS_PREFIX}{atm_id} {password}"),
            Response::Fail { message } => format!("{FAIL_PREFIX}{message}"),
        }
    }
}

impl fmt::Display for Response {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.line())
    }
}

pub fn serialize_response(r: &Response) -> String {
    let mut line = r.line();
    line.push('\n');
    line
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unrecognised response line {0:?}")]
pub struct ResponseError(pub String);

/// Inverse of [`serialize_response`]; accepts the line with or without its newline.
pub fn parse_response(line: &str) -> Result<Response, ResponseError> {
    let body = line.strip_suffix('\n').unwrap_or(line);
    let body = body.strip_suffix('\r').unwrap_or(body);
    let bad = || ResponseError(body.chars().take(80).collect());
    if let Some(rest) = body.strip_prefix(SUCCESS_PREFIX) {
        let (atm_id, password) = rest.split_once(' ').ok_or_else(bad)?;
        if atm_id.is_empty() || password.is_empty() || password.contains(' ') {
            return Err(bad());
        }
        return Ok(Response::Success { atm_id: atm_id.to_owned(), password: password.to_owned() });
    }
    match body.strip_prefix(FAIL_PREFIX) {
        Some(message) if !message.trim().is_empty() => Ok(Response::Fail { message: message.to_owned() }),
        _ => Err(bad()),
    }
}
