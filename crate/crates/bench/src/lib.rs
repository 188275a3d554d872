//! Repeated in-process GETPASS runs reported as per-stage medians.
//!
//! Each run uses a fresh pin: the injected clock advances one minute per
//! run. Rows follow the order of the published table: total, pin auth,
//! password generation, nearest terminal, QR generation, store allocation.

use std::fmt::Write as _;
use std::io;
use std::path::PathBuf;
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use lapps_core::client::{ClientOptions, Connection};
use lapps_core::geo::{AtmRecord, GeoPoint, EARTH_RADIUS_M};
use lapps_core::otp::{floor_to_minute, generate_pin, sha512_hex, MINUTE_MS};
use lapps_core::server::{ms, Server};
use lapps_core::{FakeClock, GetPassRequest, Response, ResponseMode, ServerConfig, Service, StageTimings, Store, UserRecord};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub const DEFAULT_RUNS: usize = 80;
pub const DEFAULT_ATMS: usize = 1000;

const BASE_LAT: f64 = 51.5007;
const BASE_LON: f64 = -0.1246;
const START_MS: i64 = 1_700_000_000_000;
/// Side of the square the random terminals are scattered over.
const SPREAD_M: f64 = 2000.0;

pub const ROW_NAMES: [&str; 6] = [
    "Total response time",
    "Pin authentication",
    "Generate unique password",
    "Find closest ATM",
    "QR generation",
    "Store allocation",
];

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub runs: usize,
    pub atms: usize,
    pub users: usize,
    pub mode: ResponseMode,
    /// Client threads driving a local daemon; `None` runs in-process and sequentially.
    pub parallel: Option<usize>,
    /// Persist a snapshot after every allocation, as the daemon does when configured.
    pub snapshot_path: Option<PathBuf>,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            runs: DEFAULT_RUNS,
            atms: DEFAULT_ATMS,
            users: 10,
            mode: ResponseMode::Qr,
            parallel: None,
            snapshot_path: None,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageRow {
    pub name: &'static str,
    pub median_ms: f64,
    /// Share of the total median, whole percent.
    pub percent: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub runs: usize,
    pub atms: usize,
    pub mode: ResponseMode,
    pub successes: usize,
    pub rows: Vec<StageRow>,
}

impl BenchReport {
    pub fn total_median_ms(&self) -> f64 {
        self.rows[0].median_ms
    }

    pub fn to_table(&self) -> String {
        let mut out = format!(
            "LAPPS performance: {} runs, {} terminals, {} mode, {} successful\n",
            self.runs, self.atms, self.mode, self.successes
        );
        let _ = writeln!(out, "{:<26} {:>12} {:>6}", "Stage", "Median (ms)", "%");
        for r in &self.rows {
            let _ = writeln!(out, "{:<26} {:>12.4} {:>5}%", r.name, r.median_ms, r.percent);
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("stage,median_ms,percent\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{:.6},{}", r.name, r.median_ms, r.percent);
        }
        out
    }
}

/// Median of `values`; the mean of the middle pair for even counts.
pub fn median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty(), "median of nothing");
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

pub fn percent(part: f64, total: f64) -> u32 {
    if total > 0.0 {
        (part / total * 100.0).round() as u32
    } else {
        0
    }
}

/// Builds the report from raw per-run timings.
pub fn summarize(timings: &[StageTimings], atms: usize, mode: ResponseMode, successes: usize) -> BenchReport {
    let column = |f: fn(&StageTimings) -> Duration| {
        let mut v: Vec<f64> = timings.iter().map(|t| ms(f(t))).collect();
        median(&mut v)
    };
    let medians = [
        column(|t| t.total),
        column(|t| t.pin_auth),
        column(|t| t.gen_password),
        column(|t| t.find_atm),
        column(|t| t.qr_gen),
        column(|t| t.store_alloc),
    ];
    let total = medians[0];
    let rows = ROW_NAMES
        .iter()
        .zip(medians)
        .map(|(&name, median_ms)| StageRow { name, median_ms, percent: percent(median_ms, total) })
        .collect();
    BenchReport { runs: timings.len(), atms, mode, successes, rows }
}

fn offset(metres_north: f64, metres_east: f64) -> GeoPoint {
    let lat = BASE_LAT + (metres_north / EARTH_RADIUS_M).to_degrees();
    let lon = BASE_LON + (metres_east / (EARTH_RADIUS_M * BASE_LAT.to_radians().cos())).to_degrees();
    GeoPoint::new(lat, lon).expect("fixture point in range")
}

fn user_id(i: usize) -> String {
    format!("bench{i:04}")
}

fn fixed_password(i: usize) -> String {
    format!("fixed-{i}")
}

/// Users plus `atms` terminals scattered over a 2 km square, one of them
/// 10 m from where every request is made.
pub fn fixture(atms: usize, users: usize, seed: u64) -> Store {
    let store = Store::new();
    for i in 0..users {
        let user = UserRecord::with_fixed_password(user_id(i), format!("reg{i}"), &fixed_password(i), "Bench User")
            .expect("valid fixture user");
        store.add_user(user).expect("unique fixture user");
    }
    let mut rng = StdRng::seed_from_u64(seed);
    store.add_atm(AtmRecord::new("atm-0000", offset(10.0, 0.0))).expect("fixture terminal");
    for i in 1..atms {
        let half = SPREAD_M / 2.0;
        let p = offset(rng.random_range(-half..half), rng.random_range(-half..half));
        store.add_atm(AtmRecord::new(format!("atm-{i:04}"), p)).expect("fixture terminal");
    }
    store
}

fn request(i: usize, users: usize, now_ms: i64) -> GetPassRequest {
    let u = i % users;
    let stamp = floor_to_minute(now_ms).expect("positive clock");
    let pin = generate_pin(&sha512_hex(fixed_password(u).as_bytes()), &user_id(u), stamp).expect("fixture pin");
    GetPassRequest { pin, user_id: user_id(u), reg_id: format!("reg{u}"), position: offset(0.0, 0.0) }
}

fn service(cfg: &BenchConfig) -> (Arc<Service>, Arc<FakeClock>) {
    let config = ServerConfig {
        listen_host: "127.0.0.1".into(),
        listen_port: 0,
        response_mode: cfg.mode,
        snapshot_path: cfg.snapshot_path.clone(),
        ..ServerConfig::default()
    };
    let clock = Arc::new(FakeClock::new(START_MS));
    let store = Arc::new(fixture(cfg.atms.max(1), cfg.users.max(1), cfg.seed));
    let service = Service::new(config, store, clock.clone()).with_rng_seed(cfg.seed);
    (Arc::new(service), clock)
}

/// Runs the benchmark described by `cfg`.
pub fn run_bench(cfg: &BenchConfig) -> io::Result<BenchReport> {
    assert!(cfg.runs > 0, "at least one run");
    let users = cfg.users.max(1);
    let (service, clock) = service(cfg);
    match cfg.parallel {
        None => {
            let mut timings = Vec::with_capacity(cfg.runs);
            let mut successes = 0;
            for i in 0..cfg.runs {
                let now = clock.advance(MINUTE_MS);
                let reply = service.respond(&request(i, users, now), now, cfg.mode);
                successes += usize::from(reply.response.is_success());
                timings.push(reply.timings);
            }
            Ok(summarize(&timings, cfg.atms, cfg.mode, successes))
        }
        Some(threads) => run_parallel(cfg, &service, &clock, threads.max(1), users),
    }
}

fn run_parallel(
    cfg: &BenchConfig,
    service: &Arc<Service>,
    clock: &FakeClock,
    threads: usize,
    users: usize,
) -> io::Result<BenchReport> {
    service.record_timings();
    let now = clock.advance(MINUTE_MS);
    let server = Server::bind(Arc::clone(service))?.spawn()?;
    let addr = server.addr;
    let workers: Vec<_> = (0..threads)
        .map(|t| {
            let mine: Vec<usize> = (t..cfg.runs).step_by(threads).collect();
            thread::spawn(move || -> io::Result<usize> {
                let mut conn = Connection::connect(addr, &ClientOptions::default()).map_err(io::Error::other)?;
                let mut ok = 0;
                for i in mine {
                    let r = conn.getpass(&request(i, users, now)).map_err(io::Error::other)?;
                    ok += usize::from(matches!(r, Response::Success { .. }));
                }
                Ok(ok)
            })
        })
        .collect();
    let mut successes = 0;
    for w in workers {
        successes += w.join().map_err(|_| io::Error::other("client thread panicked"))??;
    }
    server.stop()?;
    Ok(summarize(&service.take_timings(), cfg.atms, cfg.mode, successes))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(total: u64, pin: u64, pw: u64, atm: u64, qr: u64, store: u64) -> StageTimings {
        let d = Duration::from_millis;
        StageTimings {
            pin_auth: d(pin),
            find_atm: d(atm),
            gen_password: d(pw),
            qr_gen: d(qr),
            store_alloc: d(store),
            total: d(total),
        }
    }

    #[test]
    fn medians() {
        assert_eq!(median(&mut [3.0]), 3.0);
        assert_eq!(median(&mut [4.0, 1.0, 3.0]), 3.0);
        assert_eq!(median(&mut [4.0, 1.0, 3.0, 2.0]), 2.5);
    }

    #[test]
    fn single_run_report_is_that_run() {
        let r = summarize(&[t(56, 3, 4, 2, 8, 39)], 5, ResponseMode::Qr, 1);
        let medians: Vec<f64> = r.rows.iter().map(|r| r.median_ms).collect();
        assert_eq!(medians, [56.0, 3.0, 4.0, 2.0, 8.0, 39.0]);
        let pct: Vec<u32> = r.rows.iter().map(|r| r.percent).collect();
        assert_eq!(pct, [100, 5, 7, 4, 14, 70]);
    }

    #[test]
    fn rows_in_table_order() {
        let r = summarize(&[t(10, 1, 1, 1, 0, 1)], 1, ResponseMode::Text, 1);
        let names: Vec<&str> = r.rows.iter().map(|r| r.name).collect();
        assert_eq!(names, ROW_NAMES);
        assert_eq!(r.to_csv().lines().count(), 7);
        assert_eq!(r.to_table().lines().count(), 8);
    }

    #[test]
    fn percent_rounding() {
        assert_eq!(percent(39.0, 56.0), 70);
        assert_eq!(percent(1.0, 0.0), 0);
    }
}
