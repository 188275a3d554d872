//! Blocking client for the GETPASS protocol and the admin port.

use std::io::{self, BufRead, BufReader, Read, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::sync::Arc;
use std::time::Duration;

use rustls::pki_types::ServerName;
use thiserror::Error;

use crate::wire::{read_response, read_text_line, FrameError, GetPassRequest, Response, ACK_LINE};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(10);

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("connect: {0}")]
    Connect(io::Error),
    #[error("no acknowledgement from server: {0}")]
    NoAck(String),
    #[error("tls: {0}")]
    Tls(String),
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

trait Stream: Read + Write + Send {}
impl<T: Read + Write + Send> Stream for T {}

#[derive(Clone)]
pub struct ClientOptions {
    /// Applies to connecting and to every read and write.
    pub timeout: Duration,
    /// TLS settings and the name the certificate must carry.
    pub tls: Option<(Arc<rustls::ClientConfig>, String)>,
}

impl Default for ClientOptions {
    fn default() -> Self {
        ClientOptions { timeout: DEFAULT_TIMEOUT, tls: None }
    }
}

fn connect_tcp(addr: impl ToSocketAddrs, timeout: Duration) -> Result<TcpStream, ClientError> {
    let mut last = io::Error::new(io::ErrorKind::NotFound, "address resolved to nothing");
    for a in addr.to_socket_addrs().map_err(ClientError::Connect)? {
        match TcpStream::connect_timeout(&a, timeout) {
            Ok(s) => {
                s.set_read_timeout(Some(timeout))?;
                s.set_write_timeout(Some(timeout))?;
                s.set_nodelay(true)?;
                return Ok(s);
            }
            Err(e) => last = e,
        }
    }
    Err(ClientError::Connect(last))
}

/// An acknowledged protocol session.
pub struct Connection {
    reader: BufReader<Box<dyn Stream>>,
}

impl Connection {
    /// Connects and waits for the acknowledgement line.
    pub fn connect(addr: impl ToSocketAddrs, opts: &ClientOptions) -> Result<Self, ClientError> {
        let tcp = connect_tcp(addr, opts.timeout)?;
        let stream: Box<dyn Stream> = match &opts.tls {
            Some((config, name)) => {
                let name = ServerName::try_from(name.clone()).map_err(|e| ClientError::Tls(e.to_string()))?;
                let conn =
                    rustls::ClientConnection::new(Arc::clone(config), name).map_err(|e| ClientError::Tls(e.to_string()))?;
                Box::new(rustls::StreamOwned::new(conn, tcp))
            }
            None => Box::new(tcp),
        };
        let mut reader = BufReader::new(stream);
        let ack = read_text_line(&mut reader).map_err(|e| ClientError::NoAck(e.to_string()))?;
        if format!("{ack}\n") != ACK_LINE {
            return Err(ClientError::NoAck(format!("unexpected greeting {ack:?}")));
        }
        Ok(Connection { reader })
    }

    /// Sends one raw line (a newline is appended) and reads the framed reply.
    pub fn request_line(&mut self, line: &str) -> Result<Response, ClientError> {
        let out = self.reader.get_mut();
        out.write_all(line.as_bytes())?;
        out.write_all(b"\n")?;
        out.flush()?;
        Ok(read_response(&mut self.reader)?)
    }

    pub fn getpass(&mut self, req: &GetPassRequest) -> Result<Response, ClientError> {
        self.request_line(req.to_line().trim_end())
    }

    /// Raw access for byte-level protocol checks.
    pub fn reader(&mut self) -> &mut impl BufRead {
        &mut self.reader
    }

    pub fn writer(&mut self) -> &mut impl Write {
        self.reader.get_mut()
    }
}

/// Sends one admin command and returns the reply line.
pub fn admin_command(addr: impl ToSocketAddrs, command: &str, timeout: Duration) -> Result<String, ClientError> {
    let mut stream = connect_tcp(addr, timeout)?;
    stream.write_all(command.as_bytes())?;
    stream.write_all(b"\n")?;
    stream.flush()?;
    let mut reader = BufReader::new(stream);
    Ok(read_text_line(&mut reader)?)
}
