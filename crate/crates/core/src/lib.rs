//! Location-aware single-use passwords.
//!
//! A user proves possession of a fixed password by sending an 8-digit pin
//! salted with the current minute. If the pin checks out and the user stands
//! within a configured radius of a registered terminal, the service issues a
//! random password that is valid for five minutes, once, and only at that
//! terminal.
//!
//! The crate is split along the lines of the running system:
//!
//! * [`otp`]: pin derivation and validation, password generation.
//! * [`geo`]: terminal registry and radius-bounded nearest lookup.
//! * [`store`]: users, terminals, issued digests and live allocations.
//! * [`wire`]: request/response grammar, framing and the QR codec.
//! * [`server`]: configuration, the request workflow and the TCP daemon.
//! * [`client`]: blocking protocol client used by the command-line tools.

pub mod client;
pub mod geo;
pub mod otp;
pub mod server;
pub mod store;
pub mod wire;

pub use geo::{AtmRecord, AtmRegistry, GeoPoint, NearestResult};
pub use otp::{MinuteStamp, Password, Pin};
pub use server::{Clock, FakeClock, ServerConfig, Service, StageTimings, SystemClock};
pub use store::{AllocationRecord, PasswordRecord, Store, UserRecord};
pub use wire::{GetPassRequest, Response, ResponseMode};
