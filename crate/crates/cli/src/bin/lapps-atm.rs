//! Terminal emulator: checks a one-time password and consumes it.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use clap::{ArgGroup, Parser};
use lapps_cli::{exit, fail, init_logging, parse_now_ms, token};
use lapps_core::client::admin_command;
use lapps_core::server::{DENIED, LOGIN_OK};
use lapps_core::Store;

#[derive(Parser)]
#[command(version, about = "Log in at a terminal with a one-time password")]
#[command(group(ArgGroup::new("endpoint").required(true).args(["server", "snapshot"])))]
struct Args {
    #[arg(long, value_parser = token)]
    atm_id: String,
    #[arg(long, value_parser = token)]
    user_id: String,
    #[arg(long, value_parser = token)]
    password: String,
    /// Daemon admin endpoint, e.g. 127.0.0.1:7002.
    #[arg(long)]
    server: Option<String>,
    /// Store snapshot to check and update in place.
    #[arg(long)]
    snapshot: Option<PathBuf>,
    /// Clock for snapshot checks; the daemon uses its own clock.
    #[arg(long, value_parser = parse_now_ms, conflicts_with = "server")]
    now_ms: Option<i64>,
    #[arg(long, default_value_t = 10_000)]
    timeout_ms: u64,
}

fn via_server(addr: &str, args: &Args) -> ExitCode {
    let command = format!("ATMLOGIN {} {} {}", args.atm_id, args.user_id, args.password);
    match admin_command(addr, &command, Duration::from_millis(args.timeout_ms)) {
        Ok(reply) if reply == LOGIN_OK => {
            println!("{LOGIN_OK}");
            ExitCode::SUCCESS
        }
        Ok(reply) if reply == DENIED => {
            println!("{DENIED}");
            ExitCode::from(exit::DENIED)
        }
        Ok(reply) => fail(exit::TRANSPORT, format!("unexpected reply {reply:?}")),
        Err(e) => fail(exit::TRANSPORT, e),
    }
}

fn via_snapshot(path: &PathBuf, args: &Args) -> ExitCode {
    let store = match Store::restore(path) {
        Ok(s) => s,
        Err(e) => return fail(exit::TRANSPORT, e),
    };
    let now = args.now_ms.unwrap_or_else(|| {
        SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as i64)
    });
    if !store.consume_login(&args.atm_id, &args.user_id, &args.password, now) {
        println!("{DENIED}");
        return ExitCode::from(exit::DENIED);
    }
    if let Err(e) = store.snapshot(path) {
        return fail(exit::TRANSPORT, e);
    }
    println!("{LOGIN_OK}");
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    let args = Args::parse();
    init_logging();
    match (&args.server, &args.snapshot) {
        (Some(addr), _) => via_server(addr, &args),
        (_, Some(path)) => via_snapshot(path, &args),
        (None, None) => unreachable!("clap requires an endpoint"),
    }
}
