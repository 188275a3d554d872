//! Mobile client stand-in: one GETPASS round trip.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::Parser;
use lapps_cli::{exit, fail, init_logging, token};
use lapps_core::client::{ClientOptions, Connection};
use lapps_core::otp::Pin;
use lapps_core::server::tls;
use lapps_core::{GeoPoint, GetPassRequest, Response};

#[derive(Parser)]
#[command(version, about = "Request a one-time password for the nearest terminal")]
struct Args {
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    #[arg(long, default_value_t = lapps_core::server::DEFAULT_PORT)]
    port: u16,
    #[arg(long)]
    pin: String,
    #[arg(long, value_parser = token)]
    user_id: String,
    #[arg(long, value_parser = token)]
    reg_id: String,
    #[arg(long, allow_hyphen_values = true)]
    lat: f64,
    #[arg(long, allow_hyphen_values = true)]
    lon: f64,
    /// Connect, acknowledgement and read timeout.
    #[arg(long, default_value_t = 10_000)]
    timeout_ms: u64,
    /// PEM file with the CA that signed the server certificate; enables TLS.
    #[arg(long)]
    tls_ca: Option<PathBuf>,
    /// Name expected in the server certificate; defaults to --host.
    #[arg(long, requires = "tls_ca")]
    tls_name: Option<String>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    init_logging();
    let pin = match Pin::new(&args.pin) {
        Ok(p) => p,
        Err(e) => return fail(exit::USAGE, format!("--pin: {e}")),
    };
    let position = match GeoPoint::new(args.lat, args.lon) {
        Ok(p) => p,
        Err(e) => return fail(exit::USAGE, format!("--lat/--lon: {e}")),
    };
    let request = GetPassRequest { pin, user_id: args.user_id, reg_id: args.reg_id, position };

    let mut opts = ClientOptions { timeout: Duration::from_millis(args.timeout_ms), tls: None };
    if let Some(ca) = &args.tls_ca {
        match tls::client_config(ca) {
            Ok(config) => opts.tls = Some((config, args.tls_name.unwrap_or_else(|| args.host.clone()))),
            Err(e) => return fail(exit::USAGE, format!("--tls-ca: {e}")),
        }
    }

    let response = Connection::connect((args.host.as_str(), args.port), &opts).and_then(|mut c| c.getpass(&request));
    match response {
        Ok(r @ Response::Success { .. }) => {
            println!("{}", r.line());
            ExitCode::SUCCESS
        }
        Ok(r @ Response::Fail { .. }) => {
            println!("{}", r.line());
            ExitCode::from(exit::DENIED)
        }
        Err(e) => fail(exit::TRANSPORT, e),
    }
}
