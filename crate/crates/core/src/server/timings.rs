use std::time::{Duration, Instant};

/// Wall time spent in each stage of one request.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StageTimings {
    pub pin_auth: Duration,
    pub find_atm: Duration,
    pub gen_password: Duration,
    pub qr_gen: Duration,
    pub store_alloc: Duration,
    pub total: Duration,
}

impl StageTimings {
    /// Sum of the five stages; never more than `total`.
    pub fn stages_sum(&self) -> Duration {
        self.pin_auth + self.find_atm + self.gen_password + self.qr_gen + self.store_alloc
    }
}

pub fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1000.0
}

/// Runs `f`, adding its elapsed time to `slot`.
pub(crate) fn timed<T>(slot: &mut Duration, f: impl FnOnce() -> T) -> T {
    let start = Instant::now();
    let out = f();
    *slot += start.elapsed();
    out
}
