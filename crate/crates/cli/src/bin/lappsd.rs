//! The password daemon.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::Parser;
use lapps_cli::{exit, fail, init_logging, parse_now_ms};
use lapps_core::server::{bootstrap_store, load_config, Clock, FakeClock, Server, Service, SystemClock};
use log::info;

#[derive(Parser)]
#[command(version, about = "Serve GETPASS requests")]
struct Args {
    /// Properties file.
    #[arg(long)]
    config: PathBuf,
    /// Snapshot to restore before serving, instead of snapshot.path or the seeds.
    #[arg(long)]
    snapshot_restore: Option<PathBuf>,
    /// Freeze the clock at this epoch millisecond (testing only).
    #[arg(long, value_parser = parse_now_ms)]
    now_ms: Option<i64>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    init_logging();
    let config = match load_config(&args.config) {
        Ok(c) => c,
        Err(e) => return fail(exit::USAGE, format!("{}: {e}", args.config.display())),
    };
    let store = match bootstrap_store(&config, args.snapshot_restore.as_deref()) {
        Ok(s) => s,
        Err(e) => return fail(exit::USAGE, e),
    };
    let clock: Arc<dyn Clock> = match args.now_ms {
        Some(ms) => Arc::new(FakeClock::new(ms)),
        None => Arc::new(SystemClock),
    };
    let service = Arc::new(Service::new(config, Arc::new(store), clock));
    let server = match Server::bind(service) {
        Ok(s) => s,
        Err(e) => return fail(exit::TRANSPORT, format!("bind: {e}")),
    };
    // Bound addresses go to stdout so scripts can pick up ephemeral ports.
    let mut out = std::io::stdout().lock();
    if let Ok(addr) = server.local_addr() {
        let _ = writeln!(out, "LISTEN {addr}");
    }
    if let Some(addr) = server.admin_addr() {
        let _ = writeln!(out, "ADMIN {addr}");
    }
    let _ = out.flush();
    drop(out);
    match server.run() {
        Ok(()) => {
            info!("stopped");
            ExitCode::SUCCESS
        }
        Err(e) => fail(exit::TRANSPORT, e),
    }
}
