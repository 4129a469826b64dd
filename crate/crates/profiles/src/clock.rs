use std::sync::atomic::{AtomicI64, Ordering};

use chrono::{DateTime, Duration, Utc};

/// Source of event timestamps. Tests inject a [`TickClock`] so histories are reproducible.
pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<Utc>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

/// Starts at a fixed instant and advances by a fixed step on every reading.
#[derive(Debug)]
pub struct TickClock {
    start: DateTime<Utc>,
    step_ms: i64,
    ticks: AtomicI64,
}

impl TickClock {
    pub fn new(start: DateTime<Utc>, step_ms: i64) -> Self {
        TickClock { start, step_ms, ticks: AtomicI64::new(0) }
    }
}

impl Default for TickClock {
    fn default() -> Self {
        TickClock::new(DateTime::from_timestamp(1_767_225_600, 0).expect("valid instant"), 1000)
    }
}

impl Clock for TickClock {
    fn now(&self) -> DateTime<Utc> {
        let n = self.ticks.fetch_add(1, Ordering::SeqCst);
        self.start + Duration::milliseconds(n * self.step_ms)
    }
}
