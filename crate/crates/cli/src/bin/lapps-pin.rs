//! Pin device: prints the current 8-digit pin. Never touches the network.

use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::Parser;
use lapps_cli::{exit, fail, non_empty, parse_now_ms};
use lapps_core::otp::{floor_to_minute, generate_pin, sha512_hex};

#[derive(Parser)]
#[command(version, about = "Generate the pin for the current minute")]
struct Args {
    #[arg(long, value_parser = non_empty)]
    user_id: String,
    #[arg(long, value_parser = non_empty)]
    fixed_password: String,
    /// Use this epoch millisecond instead of the system clock.
    #[arg(long, value_parser = parse_now_ms)]
    now_ms: Option<i64>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let now = args.now_ms.unwrap_or_else(|| {
        SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as i64)
    });
    let pin = floor_to_minute(now)
        .and_then(|stamp| generate_pin(&sha512_hex(args.fixed_password.as_bytes()), &args.user_id, stamp));
    match pin {
        Ok(pin) => {
            println!("{}", pin.as_str());
            ExitCode::SUCCESS
        }
        Err(e) => fail(exit::USAGE, e),
    }
}
