#![allow(dead_code)]

use std::sync::Arc;

use lapps_core::geo::{AtmRecord, GeoPoint, EARTH_RADIUS_M};
use lapps_core::otp::{floor_to_minute, generate_pin, sha512_hex, Pin};
use lapps_core::server::{RunningServer, Server};
use lapps_core::{FakeClock, GetPassRequest, ResponseMode, ServerConfig, Service, Store, UserRecord};

pub const NOW: i64 = 1_700_000_000_000;
pub const LAT: f64 = 51.5007;
pub const LON: f64 = -0.1246;

pub fn north(metres: f64) -> GeoPoint {
    GeoPoint::new(LAT + (metres / EARTH_RADIUS_M).to_degrees(), LON).unwrap()
}

pub fn fixed_password(i: usize) -> String {
    format!("fp-{i}")
}

/// `users` users `u000..`, terminals at 10 m (`atm-near`) and 500 m (`atm-far`).
pub fn store(users: usize) -> Store {
    let store = Store::new();
    for i in 0..users {
        let user = UserRecord::with_fixed_password(format!("u{i:03}"), format!("r{i:03}"), &fixed_password(i), "Test")
            .unwrap();
        store.add_user(user).unwrap();
    }
    store.add_atm(AtmRecord::new("atm-near", north(10.0))).unwrap();
    store.add_atm(AtmRecord::new("atm-far", north(500.0))).unwrap();
    store
}

pub fn config(mode: ResponseMode) -> ServerConfig {
    ServerConfig {
        listen_host: "127.0.0.1".into(),
        listen_port: 0,
        admin_port: Some(0),
        response_mode: mode,
        ..ServerConfig::default()
    }
}

pub fn service(users: usize, config: ServerConfig) -> (Arc<Service>, Arc<FakeClock>) {
    let clock = Arc::new(FakeClock::new(NOW));
    let service = Service::new(config, Arc::new(store(users)), clock.clone());
    (Arc::new(service), clock)
}

pub fn spawn(service: &Arc<Service>) -> RunningServer {
    Server::bind(Arc::clone(service)).unwrap().spawn().unwrap()
}

pub fn pin(i: usize, now_ms: i64) -> Pin {
    let user = format!("u{i:03}");
    generate_pin(&sha512_hex(fixed_password(i).as_bytes()), &user, floor_to_minute(now_ms).unwrap()).unwrap()
}

pub fn request(i: usize, now_ms: i64) -> GetPassRequest {
    GetPassRequest { pin: pin(i, now_ms), user_id: format!("u{i:03}"), reg_id: format!("r{i:03}"), position: north(0.0) }
}
