//! Time-salted pins and random single-use passwords.
//!
//! A pin is derived from three inputs: the hex SHA-512 digest of the user's
//! fixed password, the current instant floored to the minute (epoch
//! milliseconds as decimal text) and the user id. The three strings are
//! concatenated without separators and hashed again; the pin is the first
//! four decimal digits of that hex digest followed by the first four decimal
//! digits of the reversed digest.
//!
//! ```
//! use lapps_core::otp::{floor_to_minute, generate_pin, sha512_hex, validate_pin};
//!
//! let fp_hash = sha512_hex(b"1234");
//! let stamp = floor_to_minute(90_000).unwrap();
//! let pin = generate_pin(&fp_hash, "u001", stamp).unwrap();
//! assert!(validate_pin(&pin, &fp_hash, "u001", 150_000));
//! assert!(!validate_pin(&pin, &fp_hash, "u001", 180_000));
//! ```

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use sha2::{Digest, Sha512};
use thiserror::Error;

/// Number of decimal digits in a pin.
pub const PIN_LEN: usize = 8;
/// One minute in milliseconds.
pub const MINUTE_MS: i64 = 60_000;
/// Length of a hex-encoded SHA-512 digest.
pub const DIGEST_HEX_LEN: usize = 128;
/// Default number of characters in an issued password.
pub const DEFAULT_PASSWORD_LEN: usize = 8;
/// Default number of draws before giving up on finding an unused password.
pub const DEFAULT_MAX_ATTEMPTS: usize = 1000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OtpError {
    #[error("timestamp must not be negative, got {0} ms")]
    NegativeTime(i64),
    #[error("{0} ms is not a whole minute")]
    UnalignedStamp(i64),
    #[error("fixed-password hash must be {DIGEST_HEX_LEN} lowercase hex characters")]
    MalformedDigest,
    #[error("user id must not be empty")]
    EmptyUserId,
    #[error("pin must be exactly {PIN_LEN} decimal digits")]
    InvalidPin,
    #[error("invalid password alphabet: {0}")]
    InvalidAlphabet(String),
    #[error("no unused password found after {0} attempts")]
    GenerationExhausted(usize),
}

/// An 8-digit decimal pin.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Pin(String);

impl Pin {
    pub fn new(digits: &str) -> Result<Self, OtpError> {
        if digits.len() == PIN_LEN && digits.bytes().all(|b| b.is_ascii_digit()) {
            Ok(Pin(digits.to_owned()))
        } else {
            Err(OtpError::InvalidPin)
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl FromStr for Pin {
    type Err = OtpError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Pin::new(s)
    }
}

impl fmt::Display for Pin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Epoch milliseconds aligned to a whole minute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MinuteStamp(i64);

impl MinuteStamp {
    /// Builds a stamp from an already aligned instant.
    pub fn from_aligned(epoch_ms: i64) -> Result<Self, OtpError> {
        if epoch_ms < 0 {
            return Err(OtpError::NegativeTime(epoch_ms));
        }
        if epoch_ms % MINUTE_MS != 0 {
            return Err(OtpError::UnalignedStamp(epoch_ms));
        }
        Ok(MinuteStamp(epoch_ms))
    }

    pub fn epoch_ms(self) -> i64 {
        self.0
    }

    /// The stamp one minute earlier, if it is not before the epoch.
    pub fn previous(self) -> Option<MinuteStamp> {
        (self.0 >= MINUTE_MS).then(|| MinuteStamp(self.0 - MINUTE_MS))
    }
}

/// Lowercase hex SHA-512 of `data`.
pub fn sha512_hex(data: &[u8]) -> String {
    hex::encode(Sha512::digest(data))
}

/// Floors an instant to the start of its minute.
pub fn floor_to_minute(now_ms: i64) -> Result<MinuteStamp, OtpError> {
    if now_ms < 0 {
        return Err(OtpError::NegativeTime(now_ms));
    }
    Ok(MinuteStamp(now_ms - now_ms % MINUTE_MS))
}

fn first_four_digits(chars: impl Iterator<Item = char>, out: &mut String) {
    let start = out.len();
    out.extend(chars.filter(char::is_ascii_digit).take(PIN_LEN / 2));
    while out.len() - start < PIN_LEN / 2 {
        out.push('0');
    }
}

/// Takes four decimal digits scanning forwards and four scanning backwards.
///
/// A half that finds fewer than four digits is padded on the right with `'0'`.
pub fn extract_pin_digits(hex: &str) -> Pin {
    let mut digits = String::with_capacity(PIN_LEN);
    first_four_digits(hex.chars(), &mut digits);
    first_four_digits(hex.chars().rev(), &mut digits);
    Pin(digits)
}

pub(crate) fn is_digest_hex(s: &str) -> bool {
    s.len() == DIGEST_HEX_LEN && s.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f'))
}

/// Derives the pin for `user_id` at `stamp`.
pub fn generate_pin(fp_hash: &str, user_id: &str, stamp: MinuteStamp) -> Result<Pin, OtpError> {
    if !is_digest_hex(fp_hash) {
        return Err(OtpError::MalformedDigest);
    }
    if user_id.is_empty() {
        return Err(OtpError::EmptyUserId);
    }
    let salted = format!("{fp_hash}{}{user_id}", stamp.epoch_ms());
    Ok(extract_pin_digits(&sha512_hex(salted.as_bytes())))
}

fn pins_equal(a: &Pin, b: &Pin) -> bool {
    a.0.bytes().zip(b.0.bytes()).fold(0u8, |acc, (x, y)| acc | (x ^ y)) == 0
}

/// Checks `received` against the current minute and the minute before it.
///
/// No other stamp is ever consulted, so a pin is accepted for at most two
/// minutes after the start of the minute it was generated in.
pub fn validate_pin(received: &Pin, fp_hash: &str, user_id: &str, now_ms: i64) -> bool {
    let Ok(current) = floor_to_minute(now_ms) else {
        return false;
    };
    let matches = |stamp: MinuteStamp| {
        generate_pin(fp_hash, user_id, stamp).is_ok_and(|expected| pins_equal(&expected, received))
    };
    matches(current) || current.previous().is_some_and(matches)
}

/// The set of characters passwords are drawn from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alphabet(Vec<char>);

impl Alphabet {
    /// `A-Z`, `a-z` and `0-9`.
    pub fn alphanumeric() -> Self {
        Alphabet(('A'..='Z').chain('a'..='z').chain('0'..='9').collect())
    }

    /// Builds an alphabet from the characters of `chars`.
    ///
    /// Passwords travel as single whitespace-free tokens, so whitespace and
    /// control characters are refused. Duplicates are refused because they
    /// would skew the draw.
    pub fn new(chars: &str) -> Result<Self, OtpError> {
        let mut set: Vec<char> = Vec::new();
        for c in chars.chars() {
            if c.is_whitespace() || c.is_control() {
                return Err(OtpError::InvalidAlphabet(format!("character {c:?} not allowed")));
            }
            if set.contains(&c) {
                return Err(OtpError::InvalidAlphabet(format!("duplicate character {c:?}")));
            }
            set.push(c);
        }
        if set.is_empty() {
            return Err(OtpError::InvalidAlphabet("empty".into()));
        }
        Ok(Alphabet(set))
    }

    pub fn chars(&self) -> &[char] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, c: char) -> bool {
        self.0.contains(&c)
    }
}

impl Default for Alphabet {
    fn default() -> Self {
        Alphabet::alphanumeric()
    }
}

impl fmt::Display for Alphabet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.iter().try_for_each(|c| write!(f, "{c}"))
    }
}

/// An issued password: the plaintext handed to the user and its stored digest.
#[derive(Clone, PartialEq, Eq)]
pub struct Password {
    plaintext: String,
    digest: String,
}

impl Password {
    pub fn from_plaintext(plaintext: impl Into<String>) -> Self {
        let plaintext = plaintext.into();
        let digest = sha512_hex(plaintext.as_bytes());
        Password { plaintext, digest }
    }

    pub fn plaintext(&self) -> &str {
        &self.plaintext
    }

    pub fn digest(&self) -> &str {
        &self.digest
    }
}

// Keeps plaintext out of logs that format with `{:?}`.
impl fmt::Debug for Password {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Password").field("digest", &self.digest).finish_non_exhaustive()
    }
}

/// Draws `length` characters uniformly and independently from `alphabet`.
///
/// # Panics
///
/// If `length` is zero.
pub fn generate_password<R: Rng + ?Sized>(rng: &mut R, length: usize, alphabet: &Alphabet) -> Password {
    assert!(length > 0, "password length must be at least 1");
    let chars = alphabet.chars();
    let plaintext: String = (0..length).map(|_| chars[rng.random_range(0..chars.len())]).collect();
    Password::from_plaintext(plaintext)
}

/// Draws passwords until `exists` reports the digest unused.
pub fn generate_unique_password<R, F>(
    rng: &mut R,
    length: usize,
    alphabet: &Alphabet,
    max_attempts: usize,
    mut exists: F,
) -> Result<Password, OtpError>
where
    R: Rng + ?Sized,
    F: FnMut(&str) -> bool,
{
    for _ in 0..max_attempts {
        let candidate = generate_password(rng, length, alphabet);
        if !exists(candidate.digest()) {
            return Ok(candidate);
        }
    }
    Err(OtpError::GenerationExhausted(max_attempts))
}
