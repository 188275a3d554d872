#![allow(dead_code)]

use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};

pub const PIN: &str = env!("CARGO_BIN_EXE_lapps-pin");
pub const CLIENT: &str = env!("CARGO_BIN_EXE_lapps-client");
pub const ATM: &str = env!("CARGO_BIN_EXE_lapps-atm");
pub const ADMIN: &str = env!("CARGO_BIN_EXE_lapps-admin");
pub const DAEMON: &str = env!("CARGO_BIN_EXE_lappsd");
pub const BENCH: &str = env!("CARGO_BIN_EXE_lapps-bench");

/// Terminal at the origin of every test journey, and one 5 m north of it.
pub const ATM_LAT: f64 = 51.5;
pub const ATM_LON: f64 = -0.12;
pub const USER_LAT: &str = "51.500045";

pub fn run(bin: &str, args: &[&str]) -> Output {
    Command::new(bin).args(args).env("RUST_LOG", "warn").output().expect("spawn tool")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).trim_end().to_owned()
}

pub fn write_seeds(dir: &Path) -> (PathBuf, PathBuf) {
    let users = dir.join("users.csv");
    let atms = dir.join("atms.csv");
    std::fs::write(&users, "userId,regId,fixedPassword,name\nu001,reg001,1234,Ada\nu002,reg002,secret,Bo\n").unwrap();
    std::fs::write(
        &atms,
        format!("atmId,lat,lon\natm-a,{ATM_LAT},{ATM_LON}\natm-b,51.6,-0.12\natm-c,51.7,-0.12\n"),
    )
    .unwrap();
    (users, atms)
}

/// A `lappsd` child process; killed on drop.
pub struct Daemon {
    child: Child,
    pub port: u16,
    pub admin: String,
}

impl Daemon {
    pub fn start(dir: &Path, mode: &str, extra_config: &str, extra: &[&str]) -> Daemon {
        let (users, atms) = write_seeds(dir);
        let config = dir.join("lapps.properties");
        std::fs::write(
            &config,
            format!(
                "listen.host=127.0.0.1\nlisten.port=0\nadmin.port=0\nresponse.mode={mode}\nseed.users={}\nseed.atms={}\n{extra_config}",
                users.display(),
                atms.display()
            ),
        )
        .unwrap();
        let mut args = vec!["--config".to_owned(), config.display().to_string()];
        args.extend(extra.iter().map(|s| s.to_string()));
        let mut child = Command::new(DAEMON)
            .args(&args)
            .env("RUST_LOG", "warn")
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .expect("spawn lappsd");
        let mut lines = BufReader::new(child.stdout.take().unwrap()).lines();
        let mut next = || lines.next().expect("daemon output").expect("daemon stdout");
        let listen = next();
        let admin = next();
        let addr = listen.strip_prefix("LISTEN ").expect("LISTEN line");
        let port = addr.rsplit(':').next().unwrap().parse().unwrap();
        let admin = admin.strip_prefix("ADMIN ").expect("ADMIN line").to_owned();
        Daemon { child, port, admin }
    }
}

impl Drop for Daemon {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

pub fn pin_now(user: &str, password: &str) -> String {
    let o = run(PIN, &["--user-id", user, "--fixed-password", password]);
    assert!(o.status.success());
    stdout(&o)
}

pub fn getpass(port: u16, pin: &str, user: &str, reg: &str, lat: &str) -> Output {
    let port = port.to_string();
    let lon = ATM_LON.to_string();
    run(
        CLIENT,
        &["--port", &port, "--pin", pin, "--user-id", user, "--reg-id", reg, "--lat", lat, "--lon", &lon],
    )
}

/// `SUCCESS: atm pw` into its two fields.
pub fn success_fields(line: &str) -> (String, String) {
    let body = line.strip_prefix("SUCCESS: ").unwrap_or_else(|| panic!("not a success line: {line:?}"));
    let mut parts = body.split(' ');
    (parts.next().unwrap().to_owned(), parts.next().unwrap().to_owned())
}
