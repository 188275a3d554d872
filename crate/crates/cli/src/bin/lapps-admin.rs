//! Seeder: builds a store snapshot from user and terminal CSV files.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use lapps_cli::{exit, fail, init_logging};
use lapps_core::store::{load_atm_seed, load_user_seed};
use lapps_core::Store;
use log::info;

#[derive(Parser)]
#[command(version, about = "Write a store snapshot from seed files")]
struct Args {
    /// userId,regId,fixedPassword,name
    #[arg(long)]
    users: PathBuf,
    /// atmId,lat,lon
    #[arg(long)]
    atms: PathBuf,
    /// Snapshot to write.
    #[arg(long)]
    out: PathBuf,
}

fn build(args: &Args) -> Result<Store, String> {
    let store = Store::new();
    let users = load_user_seed(&args.users).map_err(|e| format!("{}: {e}", args.users.display()))?;
    for user in users {
        store.add_user(user).map_err(|e| format!("{}: {e}", args.users.display()))?;
    }
    let atms = load_atm_seed(&args.atms).map_err(|e| format!("{}: {e}", args.atms.display()))?;
    for atm in atms {
        store.add_atm(atm).map_err(|e| format!("{}: {e}", args.atms.display()))?;
    }
    Ok(store)
}

fn main() -> ExitCode {
    let args = Args::parse();
    init_logging();
    let store = match build(&args) {
        Ok(s) => s,
        Err(e) => return fail(exit::USAGE, e),
    };
    if let Err(e) = store.snapshot(&args.out) {
        return fail(exit::USAGE, e);
    }
    let c = store.counts();
    info!("wrote {} users and {} terminals to {}", c.users, c.atms, args.out.display());
    println!("{} {} {} {}", c.users, c.atms, c.passwords, c.allocations);
    ExitCode::SUCCESS
}
