//! Per-stage timing table over repeated GETPASS runs.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use lapps_bench::{run_bench, BenchConfig, DEFAULT_ATMS, DEFAULT_RUNS};
use lapps_cli::{exit, fail, init_logging, positive};
use lapps_core::ResponseMode;

#[derive(Parser)]
#[command(version, about = "Time the GETPASS workflow stage by stage")]
struct Args {
    #[arg(long, default_value_t = DEFAULT_RUNS, value_parser = positive)]
    runs: usize,
    #[arg(long, default_value_t = DEFAULT_ATMS, value_parser = positive)]
    atms: usize,
    #[arg(long, default_value_t = 10, value_parser = positive)]
    users: usize,
    #[arg(long, default_value_t = ResponseMode::Qr)]
    mode: ResponseMode,
    /// Also write the report as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Drive a local daemon from this many client threads instead of calling in-process.
    #[arg(long, value_parser = positive)]
    parallel: Option<usize>,
    /// Persist a snapshot here after every allocation.
    #[arg(long)]
    snapshot: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

fn main() -> ExitCode {
    let args = Args::parse();
    init_logging();
    let config = BenchConfig {
        runs: args.runs,
        atms: args.atms,
        users: args.users,
        mode: args.mode,
        parallel: args.parallel,
        snapshot_path: args.snapshot,
        seed: args.seed,
    };
    let report = match run_bench(&config) {
        Ok(r) => r,
        Err(e) => return fail(exit::TRANSPORT, e),
    };
    print!("{}", report.to_table());
    if let Some(path) = &args.csv {
        if let Err(e) = std::fs::write(path, report.to_csv()) {
            return fail(exit::USAGE, format!("{}: {e}", path.display()));
        }
    }
    ExitCode::SUCCESS
}
