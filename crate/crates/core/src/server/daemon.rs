//! Thread-per-connection TCP daemon.
//!
//! The public listener speaks the GETPASS protocol. An optional loopback
//! admin listener accepts terminal logins and maintenance commands:
//!
//! ```text
//! ATMLOGIN <atmId> <userId> <password>   -> LOGIN OK | DENIED
//! SWEEP                                  -> SWEPT <expired> <used>
//! COUNTS                                 -> COUNTS <users> <atms> <passwords> <allocations>
//! ```

use std::io::{self, BufReader, Read, Write};
use std::net::{IpAddr, Ipv4Addr, Shutdown, SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};

use log::{debug, info, warn};

use super::service::Service;
use super::tls;
use crate::wire::{read_line_limited, Line, ACK_LINE, MAX_LINE_BYTES};

pub const LOGIN_OK: &str = "LOGIN OK";
pub const DENIED: &str = "DENIED";

/// Stops a running [`Server`].
#[derive(Clone, Debug)]
pub struct ShutdownHandle {
    flag: Arc<AtomicBool>,
    wake: Vec<SocketAddr>,
}

impl ShutdownHandle {
    pub fn shutdown(&self) {
        self.flag.store(true, Ordering::SeqCst);
        for addr in &self.wake {
            let _ = TcpStream::connect(addr);
        }
    }

    pub fn is_shutdown(&self) -> bool {
        self.flag.load(Ordering::SeqCst)
    }
}

fn wake_addr(addr: SocketAddr) -> SocketAddr {
    if addr.ip().is_unspecified() {
        SocketAddr::new(IpAddr::V4(Ipv4Addr::LOCALHOST), addr.port())
    } else {
        addr
    }
}

pub struct Server {
    listener: TcpListener,
    admin: Option<TcpListener>,
    service: Arc<Service>,
    tls: Option<Arc<rustls::ServerConfig>>,
    shutdown: ShutdownHandle,
}

impl Server {
    /// Binds the listeners named in the service configuration.
    pub fn bind(service: Arc<Service>) -> io::Result<Self> {
        let config = service.config();
        let listener = TcpListener::bind((config.listen_host.as_str(), config.listen_port))?;
        let admin = match config.admin_port {
            Some(port) => Some(TcpListener::bind((Ipv4Addr::LOCALHOST, port))?),
            None => None,
        };
        let tls = if config.tls_enabled {
            let (Some(cert), Some(key)) = (&config.tls_cert, &config.tls_key) else {
                return Err(io::Error::new(io::ErrorKind::InvalidInput, "tls.enabled requires tls.cert and tls.key"));
            };
            Some(tls::server_config(cert, key).map_err(|e| io::Error::new(io::ErrorKind::InvalidInput, e))?)
        } else {
            None
        };
        let mut wake = vec![wake_addr(listener.local_addr()?)];
        if let Some(a) = &admin {
            wake.push(a.local_addr()?);
        }
        let shutdown = ShutdownHandle { flag: Arc::new(AtomicBool::new(false)), wake };
        Ok(Server { listener, admin, service, tls, shutdown })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    pub fn admin_addr(&self) -> Option<SocketAddr> {
        self.admin.as_ref().and_then(|a| a.local_addr().ok())
    }

    pub fn shutdown_handle(&self) -> ShutdownHandle {
        self.shutdown.clone()
    }

    /// Accepts connections until shut down.
    pub fn run(self) -> io::Result<()> {
        let admin_thread = self.admin.map(|admin| {
            let service = Arc::clone(&self.service);
            let stop = self.shutdown.clone();
            thread::spawn(move || accept_loop(&admin, &stop, move |stream| serve_admin(stream, &service)))
        });
        info!(
            "listening on {} ({}, responses as {})",
            self.listener.local_addr()?,
            if self.tls.is_some() { "tls" } else { "plain" },
            self.service.config().response_mode
        );
        let service = self.service;
        let tls = self.tls;
        let result =
            accept_loop(&self.listener, &self.shutdown, move |stream| serve_client(stream, &service, tls.as_ref()));
        if let Some(t) = admin_thread {
            let _ = t.join();
        }
        info!("server stopped");
        result
    }

    /// Runs on a background thread.
    pub fn spawn(self) -> io::Result<RunningServer> {
        let addr = wake_addr(self.local_addr()?);
        let admin_addr = self.admin_addr();
        let handle = self.shutdown_handle();
        let join = thread::spawn(move || self.run());
        Ok(RunningServer { addr, admin_addr, handle, join: Some(join) })
    }
}

/// A server running on its own thread; stopped on drop.
pub struct RunningServer {
    pub addr: SocketAddr,
    pub admin_addr: Option<SocketAddr>,
    handle: ShutdownHandle,
    join: Option<JoinHandle<io::Result<()>>>,
}

impl RunningServer {
    pub fn stop(mut self) -> io::Result<()> {
        self.stop_inner()
    }

    fn stop_inner(&mut self) -> io::Result<()> {
        self.handle.shutdown();
        match self.join.take() {
            Some(j) => j.join().unwrap_or_else(|_| Err(io::Error::other("server thread panicked"))),
            None => Ok(()),
        }
    }
}

impl Drop for RunningServer {
    fn drop(&mut self) {
        let _ = self.stop_inner();
    }
}

fn accept_loop<F>(listener: &TcpListener, stop: &ShutdownHandle, handler: F) -> io::Result<()>
where
    F: Fn(TcpStream) -> io::Result<()> + Clone + Send + 'static,
{
    for conn in listener.incoming() {
        if stop.is_shutdown() {
            break;
        }
        let stream = match conn {
            Ok(s) => s,
            Err(e) => {
                warn!("accept failed: {e}");
                continue;
            }
        };
        let peer = stream.peer_addr().map(|a| a.to_string()).unwrap_or_default();
        let handler = handler.clone();
        thread::spawn(move || {
            debug!("{peer}: connected");
            match handler(stream) {
                Ok(()) => debug!("{peer}: closed"),
                Err(e) => warn!("{peer}: dropped: {e}"),
            }
        });
    }
    Ok(())
}

fn serve_client(stream: TcpStream, service: &Service, tls: Option<&Arc<rustls::ServerConfig>>) -> io::Result<()> {
    stream.set_nodelay(true)?;
    match tls {
        Some(config) => {
            let conn = rustls::ServerConnection::new(Arc::clone(config)).map_err(io::Error::other)?;
            let tls_stream = rustls::StreamOwned::new(conn, stream);
            serve_protocol(tls_stream, service)
        }
        None => serve_protocol(stream, service),
    }
}

/// Acknowledgement, then one reply per request line until EOF.
pub fn serve_protocol<S: Read + Write>(stream: S, service: &Service) -> io::Result<()> {
    let mut reader = BufReader::new(stream);
    reader.get_mut().write_all(ACK_LINE.as_bytes())?;
    reader.get_mut().flush()?;
    loop {
        let reply = match read_line_limited(&mut reader, MAX_LINE_BYTES)? {
            Line::Eof => return Ok(()),
            Line::TooLong => service.reject("request too long"),
            Line::Complete(bytes) => service.handle_line(&String::from_utf8_lossy(&bytes)),
        };
        let out = reader.get_mut();
        out.write_all(&reply.frame)?;
        out.flush()?;
    }
}

fn serve_admin(stream: TcpStream, service: &Service) -> io::Result<()> {
    let mut reader = BufReader::new(stream);
    loop {
        let line = match read_line_limited(&mut reader, MAX_LINE_BYTES)? {
            Line::Eof => return Ok(()),
            Line::TooLong => "ERROR line too long".to_owned(),
            Line::Complete(bytes) => admin_command(service, &String::from_utf8_lossy(&bytes)),
        };
        let out = reader.get_mut();
        out.write_all(line.as_bytes())?;
        out.write_all(b"\n")?;
        out.flush()?;
        if line.starts_with("BYE") {
            let _ = out.shutdown(Shutdown::Both);
            return Ok(());
        }
    }
}

fn admin_command(service: &Service, line: &str) -> String {
    let tokens: Vec<&str> = line.split_ascii_whitespace().collect();
    match tokens.as_slice() {
        ["ATMLOGIN", atm, user, password] => {
            if service.atm_login(atm, user, password) { LOGIN_OK } else { DENIED }.to_owned()
        }
        ["SWEEP"] => {
            let store = service.store();
            let expired = store.sweep_expired(service.clock().now_ms());
            let used = store.sweep_used();
            service.persist();
            format!("SWEPT {expired} {used}")
        }
        ["COUNTS"] => {
            let c = service.store().counts();
            format!("COUNTS {} {} {} {}", c.users, c.atms, c.passwords, c.allocations)
        }
        ["QUIT"] => "BYE".to_owned(),
        [] => "ERROR empty command".to_owned(),
        [verb, ..] => {
            warn!("admin: unknown command {verb:?}");
            "ERROR unknown command".to_owned()
        }
    }
}
