//! Response framing and bounded line reads.

use std::fmt;
use std::io::{self, BufRead};
use std::str::FromStr;

use thiserror::Error;

use super::message::{parse_response, serialize_response, Response, ResponseError};
use super::qr::{self, QrError};

/// Longest accepted line, newline included.
pub const MAX_LINE_BYTES: usize = 64 * 1024;
/// Largest PNG a client will accept in a QR frame.
pub const MAX_QR_FRAME_BYTES: usize = 1 << 20;
const QR_HEADER: &str = "QR ";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ResponseMode {
    Text,
    #[default]
    Qr,
}

impl FromStr for ResponseMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "text" => Ok(ResponseMode::Text),
            "qr" => Ok(ResponseMode::Qr),
            other => Err(format!("expected text or qr, got {other:?}")),
        }
    }
}

impl fmt::Display for ResponseMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ResponseMode::Text => "text",
            ResponseMode::Qr => "qr",
        })
    }
}

/// PNG of the QR symbol for a response line (newline excluded).
pub fn response_png(r: &Response) -> Result<Vec<u8>, QrError> {
    Ok(qr::encode_png(&qr::qr_encode(&r.line())?))
}

/// Frames an already rendered PNG: `QR <n>\n` then the bytes.
pub fn frame_png(png: &[u8]) -> Vec<u8> {
    let mut out = format!("{QR_HEADER}{}\n", png.len()).into_bytes();
    out.extend_from_slice(png);
    out
}

pub fn frame_response(r: &Response, mode: ResponseMode) -> Result<Vec<u8>, QrError> {
    match mode {
        ResponseMode::Text => Ok(serialize_response(r).into_bytes()),
        ResponseMode::Qr => Ok(frame_png(&response_png(r)?)),
    }
}

#[derive(Debug, Error)]
pub enum FrameError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("connection closed")]
    Closed,
    #[error("line longer than {MAX_LINE_BYTES} bytes")]
    LineTooLong,
    #[error("bad QR frame header {0:?}")]
    Header(String),
    #[error(transparent)]
    Qr(#[from] QrError),
    #[error(transparent)]
    Response(#[from] ResponseError),
}

/// Outcome of [`read_line_limited`].
#[derive(Debug, PartialEq, Eq)]
pub enum Line {
    /// Line content without the newline.
    Complete(Vec<u8>),
    /// The line exceeded the limit; the rest of it was discarded.
    TooLong,
    Eof,
}

/// Reads one `\n`-terminated line of at most `max` bytes without buffering
/// more than `max`. Oversized lines are drained up to their newline. A final
/// unterminated line is returned as complete.
pub fn read_line_limited<R: BufRead + ?Sized>(r: &mut R, max: usize) -> io::Result<Line> {
    let mut line = Vec::new();
    let mut overflow = false;
    loop {
        let available = match r.fill_buf() {
            Ok(b) => b,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
            Err(e) => return Err(e),
        };
        if available.is_empty() {
            return Ok(match (overflow, line.is_empty()) {
                (true, _) => Line::TooLong,
                (false, true) => Line::Eof,
                (false, false) => Line::Complete(line),
            });
        }
        let (chunk, done) = match available.iter().position(|&b| b == b'\n') {
            Some(i) => (&available[..i], Some(i + 1)),
            None => (available, None),
        };
        if !overflow {
            if line.len() + chunk.len() >= max {
                overflow = true;
                line = Vec::new();
            } else {
                line.extend_from_slice(chunk);
            }
        }
        let consumed = done.unwrap_or(available.len());
        r.consume(consumed);
        if done.is_some() {
            return Ok(if overflow { Line::TooLong } else { Line::Complete(line) });
        }
    }
}

/// Reads one line as UTF-8 (lossily), failing on EOF or overflow.
pub fn read_text_line<R: BufRead + ?Sized>(r: &mut R) -> Result<String, FrameError> {
    match read_line_limited(r, MAX_LINE_BYTES)? {
        Line::Complete(bytes) => Ok(String::from_utf8_lossy(&bytes).into_owned()),
        Line::TooLong => Err(FrameError::LineTooLong),
        Line::Eof => Err(FrameError::Closed),
    }
}

/// Client side: reads one framed response in either mode.
pub fn read_response<R: BufRead + ?Sized>(r: &mut R) -> Result<Response, FrameError> {
    let line = read_text_line(r)?;
    match line.strip_prefix(QR_HEADER) {
        Some(count) => {
            let n: usize = count
                .trim_end_matches('\r')
                .parse()
                .ok()
                .filter(|&n| n <= MAX_QR_FRAME_BYTES)
                .ok_or_else(|| FrameError::Header(line.clone()))?;
            let mut png = vec![0; n];
            r.read_exact(&mut png)?;
            let text = qr::qr_decode(&qr::decode_png(&png)?)?;
            Ok(parse_response(&text)?)
        }
        None => Ok(parse_response(&line)?),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn responses() -> Vec<Response> {
        vec![
            Response::Success { atm_id: "atm7".into(), password: "Ab3dEf9h".into() },
            Response::fail("bad credentials"),
            Response::fail("x".repeat(400)),
        ]
    }

    #[test]
    fn round_trip_both_modes() {
        for r in responses() {
            for mode in [ResponseMode::Text, ResponseMode::Qr] {
                let bytes = frame_response(&r, mode).unwrap();
                let mut cursor = Cursor::new(bytes);
                assert_eq!(read_response(&mut cursor).unwrap(), r, "{mode}");
                assert_eq!(cursor.position() as usize, cursor.get_ref().len());
            }
        }
    }

    #[test]
    fn qr_header_counts_payload() {
        let r = &responses()[0];
        let bytes = frame_response(r, ResponseMode::Qr).unwrap();
        let nl = bytes.iter().position(|&b| b == b'\n').unwrap();
        let header = std::str::from_utf8(&bytes[..nl]).unwrap();
        let n: usize = header.strip_prefix("QR ").unwrap().parse().unwrap();
        assert_eq!(n, bytes.len() - nl - 1);
        assert_eq!(&bytes[nl + 1..nl + 5], b"\x89PNG");
    }

    #[test]
    fn text_frame_is_the_line() {
        let r = Response::Success { atm_id: "atm7".into(), password: "Ab3dEf9h".into() };
        assert_eq!(frame_response(&r, ResponseMode::Text).unwrap(), b"SUCCESS: atm7 Ab3dEf9h\n");
    }

    #[test]
    fn bounded_lines() {
        let mut c = Cursor::new(b"abc\ndef".to_vec());
        assert_eq!(read_line_limited(&mut c, 10).unwrap(), Line::Complete(b"abc".to_vec()));
        assert_eq!(read_line_limited(&mut c, 10).unwrap(), Line::Complete(b"def".to_vec()));
        assert_eq!(read_line_limited(&mut c, 10).unwrap(), Line::Eof);

        let mut data = vec![b'a'; 100];
        data.extend_from_slice(b"\nnext\n");
        let mut c = io::BufReader::with_capacity(7, Cursor::new(data));
        assert_eq!(read_line_limited(&mut c, 10).unwrap(), Line::TooLong);
        assert_eq!(read_line_limited(&mut c, 10).unwrap(), Line::Complete(b"next".to_vec()));
    }

    #[test]
    fn bad_frames() {
        let mut c = Cursor::new(b"QR 99999999999\n".to_vec());
        assert!(matches!(read_response(&mut c), Err(FrameError::Header(_))));
        let mut c = Cursor::new(b"QR 10\nshort".to_vec());
        assert!(matches!(read_response(&mut c), Err(FrameError::Io(_))));
        let mut c = Cursor::new(Vec::new());
        assert!(matches!(read_response(&mut c), Err(FrameError::Closed)));
    }

    #[test]
    fn modes_parse() {
        assert_eq!("TEXT".parse::<ResponseMode>(), Ok(ResponseMode::Text));
        assert_eq!(" qr".parse::<ResponseMode>(), Ok(ResponseMode::Qr));
        assert!("png".parse::<ResponseMode>().is_err());
    }
}
