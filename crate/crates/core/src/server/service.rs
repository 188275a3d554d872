//! The GETPASS workflow, independent of any transport.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Instant;

use log::{debug, error, info, warn};
use parking_lot::Mutex;
use rand::rngs::StdRng;
use rand::SeedableRng;

use super::clock::Clock;
use super::config::ServerConfig;
use super::timings::{timed, StageTimings};
use crate::geo::AtmRegistry;
use crate::otp::{self, OtpError};
use crate::store::{Store, StoreError};
use crate::wire::{self, GetPassRequest, Response, ResponseMode};

pub const MSG_UNKNOWN_USER: &str = "unknown user";
pub const MSG_BAD_CREDENTIALS: &str = "bad credentials";
pub const MSG_NO_ATM: &str = "no ATM within range";
pub const MSG_INTERNAL: &str = "internal error";

/// Allocation attempts when a concurrent request claims the same digest first.
const ALLOCATION_RETRIES: usize = 3;

#[derive(Debug, Default)]
struct Counters {
    requests: AtomicU64,
    pin_checks: AtomicU64,
    atm_lookups: AtomicU64,
    password_draws: AtomicU64,
    allocations: AtomicU64,
}

/// Per-stage call counts since start-up.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CounterSnapshot {
    pub requests: u64,
    pub pin_checks: u64,
    pub atm_lookups: u64,
    pub password_draws: u64,
    pub allocations: u64,
}

/// A response with its encoded frame.
#[derive(Debug, Clone)]
pub struct Reply {
    pub response: Response,
    pub frame: Vec<u8>,
    pub timings: StageTimings,
}

pub struct Service {
    config: ServerConfig,
    store: Arc<Store>,
    registry: AtmRegistry,
    clock: Arc<dyn Clock>,
    rng: Mutex<StdRng>,
    counters: Counters,
    recorded: Mutex<Option<Vec<StageTimings>>>,
}

fn bump(c: &AtomicU64) {
    c.fetch_add(1, Ordering::Relaxed);
}

impl Service {
    /// The terminal registry is captured from `store` here; terminals are
    /// not added while serving.
    pub fn new(config: ServerConfig, store: Arc<Store>, clock: Arc<dyn Clock>) -> Self {
        let registry = store.atm_registry();
        Service {
            config,
            store,
            registry,
            clock,
            rng: Mutex::new(StdRng::from_os_rng()),
            counters: Counters::default(),
            recorded: Mutex::new(None),
        }
    }

    pub fn with_rng_seed(self, seed: u64) -> Self {
        *self.rng.lock() = StdRng::seed_from_u64(seed);
        self
    }

    pub fn config(&self) -> &ServerConfig {
        &self.config
    }

    pub fn store(&self) -> &Arc<Store> {
        &self.store
    }

    pub fn clock(&self) -> &Arc<dyn Clock> {
        &self.clock
    }

    /// Starts keeping the timings of every request answered by [`Service::handle_line`].
    pub fn record_timings(&self) {
        self.recorded.lock().get_or_insert_with(Vec::new);
    }

    /// Timings kept since the last call.
    pub fn take_timings(&self) -> Vec<StageTimings> {
        self.recorded.lock().as_mut().map(std::mem::take).unwrap_or_default()
    }

    pub fn counters(&self) -> CounterSnapshot {
        let c = &self.counters;
        let get = |a: &AtomicU64| a.load(Ordering::Relaxed);
        CounterSnapshot {
            requests: get(&c.requests),
            pin_checks: get(&c.pin_checks),
            atm_lookups: get(&c.atm_lookups),
            password_draws: get(&c.password_draws),
            allocations: get(&c.allocations),
        }
    }

    /// Runs the workflow for one request. The QR stage is left at zero.
    pub fn handle_getpass(&self, req: &GetPassRequest, now_ms: i64) -> (Response, StageTimings) {
        let start = Instant::now();
        let mut t = StageTimings::default();
        let response = self.workflow(req, now_ms, &mut t);
        t.total = start.elapsed();
        (response, t)
    }

    fn workflow(&self, req: &GetPassRequest, now_ms: i64, t: &mut StageTimings) -> Response {
        bump(&self.counters.requests);
        let user_id = req.user_id.as_str();

        let pin_ok = timed(&mut t.pin_auth, || {
            let user = self.store.find_user(user_id)?;
            bump(&self.counters.pin_checks);
            if user.reg_id != req.reg_id {
                info!("user {user_id}: registration id mismatch");
                return Some(false);
            }
            let ok = otp::validate_pin(&req.pin, &user.fp_hash, user_id, now_ms);
            if !ok {
                info!("user {user_id}: pin rejected");
            }
            Some(ok)
        });
        match pin_ok {
            None => {
                info!("unknown user {user_id:?}");
                return Response::fail(MSG_UNKNOWN_USER);
            }
            Some(false) => return Response::fail(MSG_BAD_CREDENTIALS),
            Some(true) => {}
        }

        let nearest = timed(&mut t.find_atm, || {
            bump(&self.counters.atm_lookups);
            self.registry.nearest(req.position, self.config.radius_m)
        });
        let atm = match nearest {
            Ok(Some(n)) => n,
            Ok(None) => {
                info!("user {user_id}: no terminal within {} m", self.config.radius_m);
                return Response::fail(MSG_NO_ATM);
            }
            Err(e) => {
                error!("terminal lookup failed: {e}");
                return Response::fail(MSG_INTERNAL);
            }
        };

        let expiry_ms = now_ms + self.config.password_ttl_ms;
        for _ in 0..ALLOCATION_RETRIES {
            let password = timed(&mut t.gen_password, || self.draw_password());
            let password = match password {
                Ok(p) => p,
                Err(e) => {
                    error!("password generation failed: {e}");
                    return Response::fail(MSG_INTERNAL);
                }
            };
            let stored = timed(&mut t.store_alloc, || {
                let r = self.store.replace_allocation(user_id, password.digest(), &atm.atm_id, expiry_ms, now_ms);
                if r.is_ok() {
                    self.persist();
                }
                r
            });
            match stored {
                Ok(sweep) => {
                    bump(&self.counters.allocations);
                    debug!(
                        "user {user_id}: allocated at {} ({:.1} m), swept {} expired and {} used",
                        atm.atm_id, atm.distance_m, sweep.expired, sweep.used
                    );
                    return Response::Success { atm_id: atm.atm_id, password: password.plaintext().to_owned() };
                }
                Err(StoreError::DuplicateDigest) => warn!("digest collision while allocating; drawing again"),
                Err(e) => {
                    error!("allocation failed: {e}");
                    return Response::fail(MSG_INTERNAL);
                }
            }
        }
        Response::fail(MSG_INTERNAL)
    }

    fn draw_password(&self) -> Result<otp::Password, OtpError> {
        let mut rng = self.rng.lock();
        let c = &self.config;
        otp::generate_unique_password(&mut *rng, c.password_length, &c.password_alphabet, c.password_max_attempts, |d| {
            bump(&self.counters.password_draws);
            self.store.password_digest_exists(d)
        })
    }

    /// Writes the snapshot if one is configured. Failures are logged only.
    pub fn persist(&self) {
        if let Some(path) = &self.config.snapshot_path {
            if let Err(e) = self.store.snapshot(path) {
                error!("snapshot to {} failed: {e}", path.display());
            }
        }
    }

    /// Workflow plus framing; `timings.qr_gen` covers the QR render.
    pub fn respond(&self, req: &GetPassRequest, now_ms: i64, mode: ResponseMode) -> Reply {
        let start = Instant::now();
        let (response, mut timings) = self.handle_getpass(req, now_ms);
        let frame = self.frame(&response, mode, &mut timings);
        timings.total = start.elapsed();
        Reply { response, frame, timings }
    }

    fn frame(&self, response: &Response, mode: ResponseMode, t: &mut StageTimings) -> Vec<u8> {
        match mode {
            ResponseMode::Text => wire::serialize_response(response).into_bytes(),
            ResponseMode::Qr => match timed(&mut t.qr_gen, || wire::response_png(response)) {
                Ok(png) => wire::frame_png(&png),
                Err(e) => {
                    error!("QR rendering failed: {e}");
                    wire::serialize_response(&Response::fail(MSG_INTERNAL)).into_bytes()
                }
            },
        }
    }

    /// Parses and answers one request line using the service clock and the
    /// configured response mode. Unparseable lines get a FAIL reply.
    pub fn handle_line(&self, line: &str) -> Reply {
        match wire::parse_request(line) {
            Ok(req) => {
                let reply = self.respond(&req, self.clock.now_ms(), self.config.response_mode);
                if let Some(log) = self.recorded.lock().as_mut() {
                    log.push(reply.timings);
                }
                reply
            }
            Err(e) => {
                debug!("rejected request: {e}");
                self.reject(&e.to_string())
            }
        }
    }

    /// FAIL reply framed in the configured mode.
    pub fn reject(&self, message: &str) -> Reply {
        let response = Response::fail(message);
        let mut timings = StageTimings::default();
        let frame = self.frame(&response, self.config.response_mode, &mut timings);
        Reply { response, frame, timings }
    }

    /// Terminal login: authenticates and consumes the allocation.
    pub fn atm_login(&self, atm_id: &str, user_id: &str, password: &str) -> bool {
        let ok = self.store.consume_login(atm_id, user_id, password, self.clock.now_ms());
        if ok {
            info!("user {user_id}: login accepted at {atm_id}");
            self.persist();
        } else {
            info!("user {user_id}: login denied at {atm_id}");
        }
        ok
    }
}
